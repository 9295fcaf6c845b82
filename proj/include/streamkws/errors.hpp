#pragma once

#include <stdexcept>
#include <string>

namespace streamkws {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidShape : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class CycleDetected : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed model or tensor file.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& reason)
      : Error("format error: " + reason), reason_(reason) {}

  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

/// A node cannot be executed one frame at a time.
class NotStreamable : public Error {
 public:
  NotStreamable(std::string node, std::string reason)
      : Error(node.empty() ? "not streamable: " + reason
                           : "node '" + node + "' is not streamable: " + reason),
        node_(std::move(node)),
        reason_(std::move(reason)) {}

  const std::string& node() const noexcept { return node_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string node_;
  std::string reason_;
};

class WrongMode : public Error {
 public:
  using Error::Error;
};

class MissingState : public Error {
 public:
  explicit MissingState(std::string name)
      : Error("missing state '" + name + "'"), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class TooShort : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class UnsupportedWav : public Error {
 public:
  using Error::Error;
};

}  // namespace streamkws
