#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "streamkws/serialize.hpp"
#include "streamkws/wav.hpp"
#include "streamkws/zoo.hpp"

using namespace streamkws;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  json report() const { return json::parse(out); }
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(STREAMKWS_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "streamkws_cli_tests") {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> read_all(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string kCorpus{CORPUS_DIR};

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("build --out /tmp/x.skgf").code == 2);
  const Run r = cli("build --model resnet --out /tmp/x.skgf");
  CHECK(r.code == 2);
  CHECK(r.report()["error"] == "InvalidSpec");
  const std::string message = r.report()["message"];
  for (auto name : all_models()) CHECK(message.find(model_name(name)) != std::string::npos);
}

TEST_CASE("build reports and is byte-identical for a fixed seed") {
  TempDir dir;
  const Run a = cli("build --model cnn --seed 5 --out " + (dir / "a.skgf"));
  const Run b = cli("build --model CNN --seed 5 --out " + (dir / "b.skgf"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(read_all(dir / "a.skgf") == read_all(dir / "b.skgf"));
  const json j = a.report();
  CHECK(j["model"] == "cnn");
  CHECK(j["mode"] == "non_streaming");
  CHECK(j["time_len"] == 49);
  CHECK(j["params"] == count_params(load(dir / "a.skgf")));
  CHECK(j["receptive_field"] == 53);

  CHECK(cli("build --model cnn --classes 1 --out " + (dir / "c.skgf")).code == 2);
}

TEST_CASE("convert rejects unstreamable models with exit 3") {
  TempDir dir;
  REQUIRE(cli("build --model cnn_strided --out " + (dir / "s.skgf")).code == 0);
  const Run r = cli("convert --in " + (dir / "s.skgf") + " --mode internal --out " + (dir / "t.skgf"));
  CHECK(r.code == 3);
  CHECK(r.report()["error"] == "NotStreamable");
  CHECK(r.report()["reason"] == "stride in time dimension");
  CHECK(r.report()["node"] == "conv_1");
  CHECK_FALSE(std::filesystem::exists(dir / "t.skgf"));

  REQUIRE(cli("build --model mhatt_rnn --out " + (dir / "m.skgf")).code == 0);
  const Run m = cli("convert --in " + (dir / "m.skgf") + " --mode external --out " + (dir / "t.skgf"));
  CHECK(m.code == 3);
  CHECK(m.report()["reason"] == "bidirectional recurrence depends on future frames");
}

TEST_CASE("convert lists the state registry") {
  TempDir dir;
  REQUIRE(cli("build --model gru_net --out " + (dir / "g.skgf")).code == 0);
  const Run r = cli("convert --in " + (dir / "g.skgf") + " --mode external --out " + (dir / "e.skgf"));
  REQUIRE(r.code == 0);
  const json j = r.report();
  CHECK(j["mode"] == "streaming_external");
  CHECK(j["train_time_len"] == 49);
  REQUIRE(j["states"].size() == 2);
  CHECK(j["states"][0]["name"] == "gru_1/hidden");
  CHECK(j["states"][0]["shape"] == json::array({48}));
  CHECK(j["states"][0]["kind"] == "recurrent");
  CHECK(j["states"][1]["name"] == "gru_2/hidden");
  CHECK(load(dir / "e.skgf").state_io.size() == 2);

  CHECK(cli("convert --in " + (dir / "g.skgf") + " --mode sideways --out " + (dir / "x.skgf")).code == 2);
  CHECK(cli("convert --in " + (dir / "missing.skgf") + " --mode internal --out " + (dir / "x.skgf")).code == 5);
}

TEST_CASE("verify passes for a faithful conversion and fails for a different model") {
  TempDir dir;
  REQUIRE(cli("build --model dscnn --seed 1 --out " + (dir / "a.skgf")).code == 0);
  REQUIRE(cli("build --model dscnn --seed 2 --out " + (dir / "b.skgf")).code == 0);
  REQUIRE(cli("convert --in " + (dir / "a.skgf") + " --mode internal --out " + (dir / "ai.skgf")).code == 0);
  REQUIRE(cli("convert --in " + (dir / "a.skgf") + " --mode external --out " + (dir / "ae.skgf")).code == 0);
  REQUIRE(cli("convert --in " + (dir / "b.skgf") + " --mode internal --out " + (dir / "bi.skgf")).code == 0);

  const Run ok = cli("verify --in " + (dir / "a.skgf") + " --stream " + (dir / "ai.skgf"));
  CHECK(ok.code == 0);
  CHECK(ok.report()["pass"] == true);
  CHECK(ok.report()["max_abs_diff"].get<double>() <= 1e-5);
  CHECK(ok.report()["steps"] == 49);

  const Run bad = cli("verify --in " + (dir / "a.skgf") + " --stream " + (dir / "bi.skgf"));
  CHECK(bad.code == 4);
  CHECK(bad.report()["pass"] == false);

  const Run modes = cli("verify --in " + (dir / "ai.skgf") + " --stream " + (dir / "ae.skgf") + " --frames 20");
  CHECK(modes.code == 0);
  CHECK(modes.report()["bit_equal"] == true);
  CHECK(modes.report()["steps"] == 20);
}

TEST_CASE("bench reports timings and the parameter count") {
  TempDir dir;
  REQUIRE(cli("build --model svdf_net --out " + (dir / "s.skgf")).code == 0);
  REQUIRE(cli("convert --in " + (dir / "s.skgf") + " --mode internal --out " + (dir / "si.skgf")).code == 0);
  for (const std::string file : {"s.skgf", "si.skgf"}) {
    const Run r = cli("bench --in " + (dir / file) + " --trials 5 --warmup 1 --end-to-end");
    REQUIRE(r.code == 0);
    const json j = r.report();
    CHECK(j["params"] == count_params(load(dir / "s.skgf")));
    CHECK(j["trials"] == 5);
    CHECK(j["warmup"] == 1);
    CHECK(j["end_to_end"] == true);
    CHECK(j["median_ms"].get<double>() > 0.0);
    CHECK(j["p90_ms"].get<double>() >= j["median_ms"].get<double>());
    CHECK(j["frames"] == (file == "s.skgf" ? 49 : 1));
  }
  CHECK(cli("bench --in " + (dir / "s.skgf") + " --trials 0").code == 2);
}

TEST_CASE("featurize") {
  TempDir dir;
  const Run f = cli("featurize --wav " + kCorpus + "/tone.wav --transform fft --out " + (dir / "f.skgf"));
  const Run d = cli("featurize --wav " + kCorpus + "/tone.wav --transform dft --out " + (dir / "d.skgf"));
  REQUIRE(f.code == 0);
  REQUIRE(d.code == 0);
  CHECK(f.report()["frames"] == 49);
  CHECK(f.report()["coeffs"] == 20);
  CHECK(d.report()["transform"] == "dft");
  CHECK(max_abs_diff(load_tensor(dir / "f.skgf"), load_tensor(dir / "d.skgf")) < 1e-4f);
  CHECK(read_all(dir / "d.skgf") == read_all(kCorpus + "/tone.features.skgf"));

  save_wav(dir / "low.wav", std::vector<std::int16_t>(8000, 0), 8000);
  CHECK(cli("featurize --wav " + (dir / "low.wav") + " --out " + (dir / "x.skgf")).code == 5);
  save_wav(dir / "short.wav", std::vector<std::int16_t>(100, 0), 16000);
  CHECK(cli("featurize --wav " + (dir / "short.wav") + " --out " + (dir / "x.skgf")).code == 5);
}

TEST_CASE("corpus regenerates the checked-in files") {
  TempDir dir;
  const Run r = cli("corpus --out " + dir.path.string());
  REQUIRE(r.code == 0);
  CHECK(r.report()["files"].size() == 6);
  for (const auto& entry : std::filesystem::directory_iterator(dir.path)) {
    CHECK(read_all(entry.path().string()) == read_all(kCorpus + "/" + entry.path().filename().string()));
  }
}
