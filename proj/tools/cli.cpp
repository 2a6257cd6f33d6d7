#include "dlen/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "dlen/checkpoint.hpp"
#include "dlen/dataset.hpp"
#include "dlen/metrics.hpp"
#include "dlen/parallel.hpp"
#include "dlen/suites.hpp"
#include "dlen/train.hpp"

namespace fs = std::filesystem;

namespace dlen {

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ContractError*>(&e)) return "contract violation";
  if (dynamic_cast<const NonFiniteError*>(&e)) return "non-finite value";
  if (dynamic_cast<const FormatError*>(&e)) return "format error";
  if (dynamic_cast<const NotFoundError*>(&e)) return "not found";
  if (dynamic_cast<const EmptyDatasetError*>(&e)) return "empty dataset";
  return "error";
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("DLEN_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno || *end || env[0] == '-') {
    throw UsageError(std::string("DLEN_SEED is not an unsigned integer: '") + env + "'");
  }
  return v;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ImageBuffer clamped(ImageBuffer img) {
  for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

struct TrainArgs {
  fs::path data_dir, out;
  std::size_t iters = 1000, batch = 8, crop = 128, log_every = 10;
  std::optional<std::uint64_t> seed;
  std::uint32_t width = 16;
  std::optional<std::uint32_t> seb_width;
  double lr = 2e-4;
  bool no_lwn = false, no_seab = false, no_augment = false;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(a.seed);
  const auto ds = scan_dataset(a.data_dir);
  for (const auto& w : ds.warnings) out << "warning: " << w << "\n";
  std::vector<ImagePair> pairs;
  for (std::size_t i = 0; i < ds.entries.size(); ++i) pairs.push_back(ds.load(i));

  DlenConfig cfg;
  cfg.width = a.width;
  cfg.seb_width = a.seb_width ? *a.seb_width : default_seb_width(a.width);
  cfg.use_lwn = !a.no_lwn;
  cfg.use_seab = !a.no_seab;
  const auto res = static_cast<std::uint32_t>((a.crop + 7) / 8 * 8);
  cfg.train_height = cfg.train_width = res;
  auto model = init_params<float>(cfg, seed);
  out << "training on " << pairs.size() << " pairs, " << model.parameter_count()
      << " parameters, seed " << seed << "\n";

  TrainOptions opt;
  opt.iters = a.iters;
  opt.batch = a.batch;
  opt.crop = a.crop;
  opt.seed = seed;
  opt.adam.lr = a.lr;
  opt.augment = !a.no_augment;
  const auto t0 = std::chrono::steady_clock::now();
  train_model(model, pairs, opt, [&](std::size_t it, double loss) {
    if (a.log_every && ((it + 1) % a.log_every == 0 || it + 1 == a.iters)) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "iter " << it + 1 << " loss " << loss << " elapsed " << s << "s\n" << std::flush;
    }
  });
  save_checkpoint(model, a.out);
  out << "wrote " << a.out.string() << "\n";
  return 0;
}

struct EnhanceArgs {
  fs::path model, input, output, dump;
};

int run_enhance(const EnhanceArgs& a, std::ostream& out) {
  const auto model = load_checkpoint<float>(a.model);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(a.input)) {
    fs::create_directories(a.output);
    for (const auto& p : list_images(a.input)) jobs.emplace_back(p, a.output / p.filename());
  } else {
    jobs.emplace_back(a.input, a.output);
  }
  if (!a.dump.empty()) fs::create_directories(a.dump);
  for (const auto& [src, dst] : jobs) {
    auto result = enhance_image(model, load_image(src));
    save_image(clamped(from_tensor(result.i_en)), dst);
    if (!a.dump.empty()) {
      const auto stem = src.stem().string();
      save_image(clamped(from_tensor(result.i_lu)), a.dump / (stem + ".i_lu.ppm"));
      save_image(clamped(from_tensor(result.l_tilde)), a.dump / (stem + ".l_tilde.ppm"));
      save_image(clamped(from_tensor(result.i_flb)), a.dump / (stem + ".i_flb.ppm"));
      if (result.i_feb.defined()) {
        save_image(clamped(from_tensor(result.i_feb)), a.dump / (stem + ".i_feb.ppm"));
      }
    }
    out << src.string() << " -> " << dst.string() << "\n";
  }
  return 0;
}

struct EvalArgs {
  fs::path model, data_dir, report, kv;
  std::string ssim = "windowed";
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  const auto model = load_checkpoint<float>(a.model);
  const auto ds = scan_dataset(a.data_dir);
  for (const auto& w : ds.warnings) out << "warning: " << w << "\n";
  MetricReport report;
  report.ssim_kind = a.ssim == "global" ? SsimKind::global : SsimKind::windowed;
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    const auto pair = ds.load(i);
    auto pred = clamped(from_tensor(enhance_image(model, pair.low).i_en));
    // Scores are computed on the 8-bit values that would be saved.
    for (auto& v : pred.pixels) v = quantize(v) / 255.0f;
    report.add(ds.entries[i].name, pred, pair.high);
  }
  const auto tsv = report.to_tsv();
  if (!a.report.empty()) {
    std::ofstream(a.report) << tsv;
  }
  if (!a.kv.empty()) {
    std::ofstream(a.kv) << report.to_kv();
  }
  out << tsv;
  return 0;
}

struct SynthArgs {
  fs::path input_dir, out_dir;
  double gamma = 2.0, gain = 0.4, noise = 0.02;
  std::optional<std::uint64_t> seed;
  std::size_t procedural = 0, size = 128;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(a.seed);
  if (a.input_dir.empty() == (a.procedural == 0)) {
    throw UsageError("synth needs exactly one of --input-dir or --procedural");
  }
  std::vector<std::pair<std::string, ImageBuffer>> sources;
  if (a.procedural) {
    for (std::size_t i = 0; i < a.procedural; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "img%04zu.ppm", i);
      sources.emplace_back(name, procedural_image(a.size, a.size, mix_seed(seed, i)));
    }
  } else {
    if (!fs::is_directory(a.input_dir)) {
      throw NotFoundError("missing input directory " + a.input_dir.string());
    }
    for (const auto& p : list_images(a.input_dir)) {
      sources.emplace_back(p.stem().string() + ".ppm", load_image(p));
    }
  }
  fs::create_directories(a.out_dir / "low");
  fs::create_directories(a.out_dir / "high");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& [name, high] = sources[i];
    save_image(high, a.out_dir / "high" / name);
    save_image(synth_lowlight(high, a.gamma, a.gain, a.noise, mix_seed(seed, 1000 + i)),
               a.out_dir / "low" / name);
  }
  out << "wrote " << sources.size() << " pairs to " << a.out_dir.string() << "\n";
  return 0;
}

int report_checks(const std::vector<CheckResult>& results, std::ostream& out) {
  bool all = true;
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " ("
        << static_cast<int>(r.seconds * 1000) << " ms)\n";
    all &= r.pass;
  }
  out << (all ? "all checks passed" : "some checks failed") << "\n";
  return all ? 0 : 1;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-light image enhancement: training, inference and evaluation", "dlen"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads (1 = fully deterministic)")
        ->check(CLI::Range(1, 256));
  };

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a paired dataset");
  train->add_option("--data-dir", ta.data_dir, "Dataset root with low/ and high/")->required();
  train->add_option("--out", ta.out, "Checkpoint to write")->required();
  train->add_option("--iters", ta.iters, "Training iterations")->capture_default_str();
  train->add_option("--batch", ta.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--crop", ta.crop, "Square crop size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed, "Seed (falls back to DLEN_SEED, then 0)");
  train->add_option("--width", ta.width, "Model width C")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--seb-width", ta.seb_width, "Structure branch width (default about C/2)")
      ->check(CLI::PositiveNumber);
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--log-every", ta.log_every, "Log the loss every K iterations")->capture_default_str();
  train->add_flag("--no-lwn", ta.no_lwn, "Drop the wavelet module");
  train->add_flag("--no-seab", ta.no_seab, "Drop the structure branch");
  train->add_flag("--no-augment", ta.no_augment, "Disable flips and rotations");
  add_threads(train);

  EnhanceArgs ea;
  auto* enhance = app.add_subcommand("enhance", "Enhance an image or a directory of images");
  enhance->add_option("--model", ea.model, "Checkpoint")->required();
  enhance->add_option("--input", ea.input, "Input PPM or directory")->required();
  enhance->add_option("--output", ea.output, "Output PPM or directory")->required();
  enhance->add_option("--dump-intermediates", ea.dump, "Directory for I_lu, L_tilde, I_flb, I_feb");
  add_threads(enhance);

  EvalArgs va;
  auto* eval = app.add_subcommand("eval", "Score a model on a paired dataset");
  eval->add_option("--model", va.model, "Checkpoint")->required();
  eval->add_option("--data-dir", va.data_dir, "Dataset root with low/ and high/")->required();
  eval->add_option("--report", va.report, "TSV report path");
  eval->add_option("--kv", va.kv, "key=value summary path");
  eval->add_option("--ssim", va.ssim, "SSIM variant")
      ->check(CLI::IsMember({"windowed", "global"}))
      ->capture_default_str();
  add_threads(eval);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Build a synthetic low/high dataset");
  synth->add_option("--input-dir", sa.input_dir, "Directory of well-lit PPM images");
  synth->add_option("--procedural", sa.procedural, "Generate N images instead of reading them");
  synth->add_option("--size", sa.size, "Procedural image size")->capture_default_str()->check(CLI::Range(2, 8192));
  synth->add_option("--out-dir", sa.out_dir, "Output dataset root")->required();
  synth->add_option("--gamma", sa.gamma, "Darkening exponent")->capture_default_str();
  synth->add_option("--gain", sa.gain, "Brightness gain")->capture_default_str();
  synth->add_option("--noise", sa.noise, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--seed", sa.seed, "Seed (falls back to DLEN_SEED, then 0)");

  std::optional<std::uint64_t> check_seed;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite (64-bit)");
  gradcheck->add_option("--seed", check_seed, "Seed");
  auto* selftest = app.add_subcommand("selftest", "Reconstruction, metric, determinism and shape checks");
  selftest->add_option("--seed", check_seed, "Seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    set_num_threads(threads);
    if (train->parsed()) return run_train(ta, out);
    if (enhance->parsed()) return run_enhance(ea, out);
    if (eval->parsed()) return run_eval(va, out);
    if (synth->parsed()) return run_synth(sa, out);
    if (gradcheck->parsed()) return report_checks(gradient_checks(resolve_seed(check_seed)), out);
    if (selftest->parsed()) return report_checks(selftest_suite(resolve_seed(check_seed)), out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << error_kind(e) << ": " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace dlen
