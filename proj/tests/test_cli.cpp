#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dlen/checkpoint.hpp"
#include "dlen/cli.hpp"
#include "dlen/image.hpp"

using namespace dlen;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Sandbox {
  fs::path dir = fs::temp_directory_path() / ("dlen_cli_" + std::to_string(::getpid()));
  Sandbox() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run({"synth", "--procedural", "3", "--size", "24", "--out-dir", s("data"), "--seed", "4"})
                .code == 0);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string s(const std::string& rel) const { return (dir / rel).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"enhance", "--model", "m", "--input", "i", "--output", "o", "--bogus"}).code == 2);
  CHECK(run({"train", "--data-dir", "d", "--out", "o", "--iters", "many"}).code == 2);
  CHECK(run({"eval", "--model", "m", "--data-dir", "d", "--ssim", "fancy"}).code == 2);
  CHECK(run({"synth", "--out-dir", "x"}).code == 2);
}

TEST_CASE("runtime failures exit with status 1") {
  auto r = run({"enhance", "--model", "/nonexistent/m.ckpt", "--input", "a", "--output", "b"});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
  CHECK(run({"train", "--data-dir", "/nonexistent", "--out", "x"}).code == 1);
}

TEST_CASE("train, enhance and eval") {
  Sandbox sb;
  CHECK(fs::exists(sb.dir / "data" / "low" / "img0002.ppm"));
  CHECK(fs::exists(sb.dir / "data" / "high" / "img0002.ppm"));

  SUBCASE("zero iterations writes the initialization") {
    REQUIRE(run({"train", "--data-dir", sb.s("data"), "--out", sb.s("m.ckpt"), "--iters", "0",
                 "--width", "4", "--crop", "16", "--seed", "11"})
                .code == 0);
    DlenConfig cfg;
    cfg.width = 4;
    cfg.seb_width = default_seb_width(4);
    cfg.train_height = cfg.train_width = 16;
    auto init = init_params<float>(cfg, 11);
    auto bytes = serialize_checkpoint(init);
    CHECK(slurp(sb.dir / "m.ckpt") == std::string(bytes.begin(), bytes.end()));

    ::setenv("DLEN_SEED", "11", 1);
    REQUIRE(run({"train", "--data-dir", sb.s("data"), "--out", sb.s("env.ckpt"), "--iters", "0",
                 "--width", "4", "--crop", "16"})
                .code == 0);
    ::unsetenv("DLEN_SEED");
    CHECK(slurp(sb.dir / "env.ckpt") == slurp(sb.dir / "m.ckpt"));

    // A fresh model returns its brightened image unchanged.
    REQUIRE(run({"enhance", "--model", sb.s("m.ckpt"), "--input", sb.s("data/low/img0001.ppm"),
                 "--output", sb.s("one.ppm"), "--dump-intermediates", sb.s("dump")})
                .code == 0);
    CHECK(slurp(sb.dir / "one.ppm") == slurp(sb.dir / "dump" / "img0001.i_lu.ppm"));
    CHECK(fs::exists(sb.dir / "dump" / "img0001.l_tilde.ppm"));
  }

  SUBCASE("short training run and evaluation report") {
    REQUIRE(run({"train", "--data-dir", sb.s("data"), "--out", sb.s("t.ckpt"), "--iters", "2",
                 "--batch", "2", "--width", "4", "--crop", "16", "--seed", "1", "--no-seab"})
                .code == 0);
    CHECK_FALSE(load_checkpoint<float>(sb.dir / "t.ckpt").config.use_seab);
    REQUIRE(run({"enhance", "--model", sb.s("t.ckpt"), "--input", sb.s("data/low"), "--output",
                 sb.s("out")})
                .code == 0);
    CHECK(load_image(sb.dir / "out" / "img0000.ppm").width == 24);
    auto r = run({"eval", "--model", sb.s("t.ckpt"), "--data-dir", sb.s("data"), "--report",
                  sb.s("r.tsv"), "--kv", sb.s("r.kv")});
    REQUIRE(r.code == 0);
    const auto tsv = slurp(sb.dir / "r.tsv");
    CHECK(tsv == r.out);
    CHECK(tsv.rfind("name\tpsnr_db\tssim\n", 0) == 0);
    CHECK(tsv.find("\nimg0002.ppm\t") != std::string::npos);
    CHECK(tsv.find("\nMEAN\t") != std::string::npos);
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 5);
    CHECK_FALSE(slurp(sb.dir / "r.kv").empty());
  }
}

TEST_CASE("synth is reproducible") {
  Sandbox sb;
  REQUIRE(run({"synth", "--procedural", "3", "--size", "24", "--out-dir", sb.s("again"), "--seed",
               "4"})
              .code == 0);
  for (const char* side : {"low", "high"}) {
    CHECK(slurp(sb.dir / "data" / side / "img0000.ppm") ==
          slurp(sb.dir / "again" / side / "img0000.ppm"));
  }
  REQUIRE(run({"synth", "--input-dir", sb.s("data/high"), "--out-dir", sb.s("derived"),
               "--gamma", "1", "--gain", "1", "--noise", "0"})
              .code == 0);
  CHECK(slurp(sb.dir / "derived" / "low" / "img0001.ppm") ==
        slurp(sb.dir / "data" / "high" / "img0001.ppm"));
}

TEST_CASE("gradcheck subcommand passes") {
  auto r = run({"gradcheck", "--seed", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
