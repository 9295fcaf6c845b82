#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "streamkws/bench.hpp"
#include "streamkws/corpus.hpp"
#include "streamkws/errors.hpp"
#include "streamkws/frontend.hpp"
#include "streamkws/serialize.hpp"
#include "streamkws/stream_transform.hpp"
#include "streamkws/wav.hpp"
#include "streamkws/zoo.hpp"

using json = nlohmann::ordered_json;
using namespace streamkws;

namespace {

enum Exit : int { kOk = 0, kUsage = 2, kNotStreamable = 3, kVerifyFailed = 4, kIo = 5 };

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

json states_json(const Graph& g) {
  json arr = json::array();
  for (const auto& s : g.state_io) {
    arr.push_back({{"name", s.name},
                   {"shape", s.shape},
                   {"owner", s.owner},
                   {"kind", s.kind == StateKind::RingBuffer ? "ring_buffer" : "recurrent"}});
  }
  return arr;
}

int fail(int code, const std::string& kind, const std::string& message, json extra = json::object()) {
  json j{{"error", kind}, {"message", message}};
  j.update(extra);
  emit(j);
  std::cerr << "streamkws: " << message << '\n';
  return code;
}

struct BuildArgs {
  std::string model;
  std::uint64_t seed = 0;
  std::string out;
  std::int64_t frames = 49;
  std::int64_t features = 20;
  std::int64_t classes = 12;
};

int cmd_build(const BuildArgs& a) {
  const auto name = parse_model_name(a.model);
  if (!name) {
    return fail(kUsage, "InvalidSpec",
                "unknown model '" + a.model + "'; valid names: " + valid_model_names());
  }
  const Graph g = build(ZooSpec{*name, a.frames, a.features, a.classes, a.seed});
  save(g, a.out);
  emit({{"model", model_name(*name)},
        {"mode", mode_name(g.mode)},
        {"params", count_params(g)},
        {"receptive_field", receptive_field(g)},
        {"time_len", g.time_len},
        {"out", a.out}});
  return kOk;
}

struct ConvertArgs {
  std::string in;
  std::string mode;
  std::int64_t frames = 0;
  std::string out;
};

int cmd_convert(const ConvertArgs& a) {
  const Graph g = load(a.in);
  const std::int64_t frames = a.frames > 0 ? a.frames : g.time_len;
  const StateMode mode = a.mode == "external" ? StateMode::External : StateMode::Internal;
  try {
    const Graph s = to_streaming(g, mode, frames);
    save(s, a.out);
    emit({{"mode", mode_name(s.mode)},
          {"train_time_len", s.train_time_len},
          {"states", states_json(s)},
          {"out", a.out}});
  } catch (const NotStreamable& e) {
    return fail(kNotStreamable, "NotStreamable", e.what(), {{"node", e.node()}, {"reason", e.reason()}});
  }
  return kOk;
}

struct VerifyArgs {
  std::string in;
  std::string stream;
  std::int64_t frames = 49;
  std::uint64_t seed = 0;
};

int cmd_verify(const VerifyArgs& a) {
  const Graph reference = load(a.in);
  const Graph stream = load(a.stream);
  const VerifyReport r = verify_pair(reference, stream, a.frames, a.seed);
  emit({{"max_abs_diff", r.max_abs_diff},
        {"pass", r.pass},
        {"bit_equal", r.bit_equal},
        {"tolerance", kVerifyTolerance},
        {"reference", r.reference},
        {"steps", r.steps}});
  return r.pass ? kOk : kVerifyFailed;
}

struct BenchArgs {
  std::string in;
  std::int64_t trials = 100;
  std::int64_t warmup = 10;
  bool end_to_end = false;
};

int cmd_bench(const BenchArgs& a) {
  const Graph g = load(a.in);
  const BenchReport r = bench_graph(g, a.trials, a.warmup, a.end_to_end);
  emit({{"mode", r.mode},
        {"params", r.params},
        {"median_ms", r.stats.median_ms},
        {"p90_ms", r.stats.p90_ms},
        {"trials", r.stats.trials},
        {"warmup", r.stats.warmup},
        {"frames", r.frames},
        {"end_to_end", r.end_to_end}});
  return kOk;
}

struct FeaturizeArgs {
  std::string wav;
  std::string transform = "fft";
  std::string out;
};

int cmd_featurize(const FeaturizeArgs& a) {
  FeatureConfig cfg;
  cfg.transform = a.transform == "dft" ? Transform::Dft : Transform::Fft;
  const auto samples = load_wav_mono(a.wav, cfg.sample_rate_hz);
  const Tensor features = MfccExtractor(cfg).extract_clip(samples);
  save_tensor(features, a.out);
  emit({{"frames", features.dim(0)},
        {"coeffs", features.dim(1)},
        {"transform", a.transform},
        {"out", a.out}});
  return kOk;
}

int cmd_corpus(const std::string& dir) {
  json files = json::array();
  for (const auto& p : generate_corpus(dir)) files.push_back(p.string());
  emit({{"files", files}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming keyword-spotting inference engine"};
  app.require_subcommand(1);

  BuildArgs build_args;
  auto* build_cmd = app.add_subcommand("build", "Build a zoo model with seeded weights");
  build_cmd->add_option("--model", build_args.model, "Model name: " + valid_model_names())->required();
  build_cmd->add_option("--seed", build_args.seed, "Weight seed");
  build_cmd->add_option("--out", build_args.out, "Output model file")->required();
  build_cmd->add_option("--frames", build_args.frames, "Input frames")->capture_default_str();
  build_cmd->add_option("--features", build_args.features, "Features per frame")->capture_default_str();
  build_cmd->add_option("--classes", build_args.classes, "Output classes")->capture_default_str();

  ConvertArgs convert_args;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a model to streaming form");
  convert_cmd->add_option("--in", convert_args.in, "Non-streaming model file")->required();
  convert_cmd->add_option("--mode", convert_args.mode, "State mode")
      ->required()
      ->check(CLI::IsMember({"internal", "external"}));
  convert_cmd->add_option("--frames", convert_args.frames,
                          "Training sequence length (default: the model's time length)");
  convert_cmd->add_option("--out", convert_args.out, "Output model file")->required();

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Check streaming outputs against a reference");
  verify_cmd->add_option("--in", verify_args.in, "Reference model file")->required();
  verify_cmd->add_option("--stream", verify_args.stream, "Streaming model file")->required();
  verify_cmd->add_option("--frames", verify_args.frames, "Frames to stream")->capture_default_str();
  verify_cmd->add_option("--seed", verify_args.seed, "Input seed");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Measure inference latency");
  bench_cmd->add_option("--in", bench_args.in, "Model file")->required();
  bench_cmd->add_option("--trials", bench_args.trials, "Timed runs")->capture_default_str();
  bench_cmd->add_option("--warmup", bench_args.warmup, "Untimed runs")->capture_default_str();
  bench_cmd->add_flag("--end-to-end", bench_args.end_to_end, "Include MFCC extraction");

  FeaturizeArgs featurize_args;
  auto* featurize_cmd = app.add_subcommand("featurize", "Extract MFCC features from a WAV file");
  featurize_cmd->add_option("--wav", featurize_args.wav, "16 kHz mono 16-bit WAV")->required();
  featurize_cmd->add_option("--transform", featurize_args.transform, "Spectrum transform")
      ->check(CLI::IsMember({"fft", "dft"}))
      ->capture_default_str();
  featurize_cmd->add_option("--out", featurize_args.out, "Output tensor file")->required();

  std::string corpus_dir;
  auto* corpus_cmd = app.add_subcommand("corpus", "Generate the test corpus");
  corpus_cmd->add_option("--out", corpus_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*build_cmd) return cmd_build(build_args);
    if (*convert_cmd) return cmd_convert(convert_args);
    if (*verify_cmd) return cmd_verify(verify_args);
    if (*bench_cmd) return cmd_bench(bench_args);
    if (*featurize_cmd) return cmd_featurize(featurize_args);
    if (*corpus_cmd) return cmd_corpus(corpus_dir);
  } catch (const IoError& e) {
    return fail(kIo, "IoError", e.what());
  } catch (const FormatError& e) {
    return fail(kIo, "FormatError", e.what());
  } catch (const UnsupportedWav& e) {
    return fail(kIo, "UnsupportedWav", e.what());
  } catch (const TooShort& e) {
    return fail(kIo, "TooShort", e.what());
  } catch (const NotStreamable& e) {
    return fail(kNotStreamable, "NotStreamable", e.what(), {{"node", e.node()}, {"reason", e.reason()}});
  } catch (const Error& e) {
    return fail(kUsage, "Error", e.what());
  }
  return kUsage;
}
