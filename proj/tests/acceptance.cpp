// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dlen/checkpoint.hpp"
#include "dlen/suites.hpp"

namespace fs = std::filesystem;
using namespace dlen;

namespace {

constexpr std::uint64_t kSeed = 20240607;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Workspace {
  fs::path root;
  fs::path log;
  explicit Workspace(const std::string& tag) {
    root = fs::temp_directory_path() / ("dlen_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    log = root / "log.txt";
  }
  ~Workspace() { fs::remove_all(root); }

  // Runs the dlen tool in this workspace; throws with the log tail on a nonzero exit.
  void run(const std::string& args) const {
    const std::string cmd = "cd '" + root.string() + "' && '" DLEN_TOOL_PATH "' " + args +
                            " >> '" + log.string() + "' 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      auto text = read_file(log);
      if (text.size() > 400) text = text.substr(text.size() - 400);
      throw std::runtime_error("command failed: dlen " + args + "\n" + text);
    }
  }
};

std::size_t param_count(const fs::path& ckpt) {
  return load_checkpoint<float>(ckpt).parameter_count();
}

bool reloads_exactly(const fs::path& ckpt) {
  auto model = load_checkpoint<float>(ckpt);
  auto bytes = serialize_checkpoint(model);
  const auto file = read_file(ckpt);
  return file == std::string(bytes.begin(), bytes.end());
}

CheckResult criterion_gradients() {
  return run_check("gradient suite", [] {
    auto rows = gradient_checks(kSeed);
    std::string detail, failed;
    for (const auto& r : rows) {
      if (!r.pass) failed += " [" + r.name + ": " + r.detail + "]";
    }
    detail = fmt("%zu blocks checked", rows.size());
    return std::pair{failed.empty(), failed.empty() ? detail : detail + ", failed:" + failed};
  });
}

CheckResult criterion_overfit() {
  return run_check("overfit on 4 synthetic pairs", [] {
    OverfitOptions o;
    o.seed = kSeed;
    o.on_step = [](std::size_t it, double loss) {
      if (it % 20 == 0) std::fprintf(stderr, "  overfit iter %zu loss %.5f\n", it, loss);
    };
    auto r = run_overfit(o);
    const bool mae_ok = r.final_mae <= r.initial_mae / 5.0;
    const bool psnr_ok = r.output_psnr - r.input_psnr >= 3.0;
    return std::pair{mae_ok && psnr_ok,
                     fmt("MAE %.4f -> %.4f (need <= %.4f), PSNR input %.2f dB, output %.2f dB "
                         "(gain %.2f, need >= 3)",
                         r.initial_mae, r.final_mae, r.initial_mae / 5.0, r.input_psnr,
                         r.output_psnr, r.output_psnr - r.input_psnr)};
  });
}

CheckResult criterion_ablations() {
  return run_check("ablation variants end to end", [] {
    Workspace ws("ablation");
    ws.run(fmt("synth --procedural 4 --size 32 --out-dir data --seed %llu",
               static_cast<unsigned long long>(kSeed)));
    const char* variants[][2] = {{"full", ""}, {"no_lwn", "--no-lwn"}, {"no_seab", "--no-seab"}};
    std::size_t counts[3];
    std::string detail;
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
      const std::string name = variants[i][0];
      ws.run(fmt("train --data-dir data --out %s.ckpt --iters 3 --batch 2 --crop 32 --width 8 "
                 "--seed 1 %s",
                 name.c_str(), variants[i][1]));
      ws.run("enhance --model " + name + ".ckpt --input data/low --output out_" + name);
      ws.run("eval --model " + name + ".ckpt --data-dir data --report " + name + ".tsv");
      counts[i] = param_count(ws.root / (name + ".ckpt"));
      const bool reload = reloads_exactly(ws.root / (name + ".ckpt"));
      const bool report = read_file(ws.root / (name + ".tsv")).find("\nMEAN\t") != std::string::npos;
      const bool outputs = fs::exists(ws.root / ("out_" + name) / "img0003.ppm");
      ok = ok && reload && report && outputs;
      detail += fmt("%s: %zu params%s%s%s; ", name.c_str(), counts[i], reload ? "" : " RELOAD MISMATCH",
                    report ? "" : " NO REPORT", outputs ? "" : " NO OUTPUTS");
    }
    ok = ok && counts[1] < counts[0] && counts[2] < counts[0];
    return std::pair{ok, detail};
  });
}

CheckResult criterion_determinism() {
  return run_check("determinism across independent runs", [] {
    Workspace ws("determinism");
    ws.run(fmt("synth --procedural 4 --size 64 --out-dir data --seed %llu",
               static_cast<unsigned long long>(kSeed)));
    for (const char* run : {"a", "b"}) {
      ws.run(fmt("train --data-dir data --out %s.ckpt --iters 20 --threads 1 --batch 4 --crop 64 "
                 "--seed 7",
                 run));
      ws.run(fmt("enhance --model %s.ckpt --input data/low --output out_%s --threads 1", run, run));
    }
    const bool same_ckpt = read_file(ws.root / "a.ckpt") == read_file(ws.root / "b.ckpt");
    bool same_out = true;
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(ws.root / "out_a")) {
      ++files;
      same_out = same_out &&
                 read_file(e.path()) == read_file(ws.root / "out_b" / e.path().filename());
    }
    return std::pair{same_ckpt && same_out && files == 4,
                     fmt("checkpoints %s, %zu enhanced images %s",
                         same_ckpt ? "identical" : "DIFFER", files,
                         same_out ? "identical" : "DIFFER")};
  });
}

void report(int index, const CheckResult& r, int& failures) {
  if (!r.pass) ++failures;
  std::printf("[%d] %s %s: %s (%.1f s)\n", index, r.pass ? "PASS" : "FAIL", r.name.c_str(),
              r.detail.c_str(), r.seconds);
  std::fflush(stdout);
}

}  // namespace

int main() {
  int failures = 0;
  report(1, check_wavelet_reconstruction(kSeed), failures);
  report(2, check_subband_energy(kSeed), failures);
  report(3, criterion_gradients(), failures);
  report(4, check_init_identity(kSeed), failures);
  report(5, criterion_overfit(), failures);
  report(6, check_metric_oracles(kSeed), failures);
  report(7, criterion_ablations(), failures);
  report(8, criterion_determinism(), failures);
  report(9, check_shapes(kSeed), failures);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
