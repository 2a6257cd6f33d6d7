#include "doctest.h"
#include "dlen/seb.hpp"
#include "test_util.hpp"

using namespace dlen;
using dlen::testing::random_tensor;

namespace {

template <typename P>
void randomize_all(P& params, Prng& rng, double scale = 0.5) {
  params.visit("p", [&](const std::string& name, Tensor<double>& t, const InitSpec&) {
    dlen::testing::randomize(t, rng, scale);
    if (name.ends_with("beta") && !name.ends_with("norm1.beta") &&
        !name.ends_with("norm2.beta")) {
      for (auto& v : t.mutable_data()) v = 1.0 + 0.5 * v;
    }
    if (name.ends_with("gamma")) {
      for (auto& v : t.mutable_data()) v = 1.0 + 0.5 * v;
    }
  });
}

std::vector<Tensor<double>> collect(auto& params) {
  std::vector<Tensor<double>> out;
  params.visit("p", [&](const std::string&, Tensor<double>& t, const InitSpec&) {
    out.push_back(t);
  });
  return out;
}

}  // namespace

TEST_CASE("seab_attention shapes and normalization") {
  Prng rng(1);
  const std::size_t cs = 4;
  for (std::size_t l = 0; l < 4; ++l) {
    const std::size_t c = cs << l;
    SeabParams<double> p(c, std::size_t{1} << l, 2);
    randomize_all(p, rng);
    auto x = random_tensor<double>({2, c, 4, 4}, rng);
    std::vector<Tensor<double>> maps;
    auto y = seab_attention(x, p, &maps);
    CHECK(y.shape() == x.shape());
    const auto& a = maps.at(0);
    const std::size_t heads = a.dim(1), d = a.dim(2);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t col = 0; col < d; ++col) {
          double s = 0.0;
          for (std::size_t row = 0; row < d; ++row) s += a.at({b, h, row, col});
          CHECK(std::abs(s - 1.0) < 1e-6);
        }
  }
}

TEST_CASE("single-channel seab attention reduces to value plus residual") {
  Prng rng(2);
  SeabParams<double> p(1, 1, 2);
  randomize_all(p, rng);
  p.proj.weight.mutable_data()[0] = 1.0;
  auto x = random_tensor<double>({1, 1, 5, 5}, rng);
  auto v = p.v_depth(p.v_point(p.norm1(x)));
  auto y = seab_attention(x, p);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(y.data()[i] == doctest::Approx(v.data()[i] + x.data()[i]).epsilon(1e-14));
  }
  for (auto& b : p.beta.mutable_data()) b = 0.0;
  CHECK_THROWS_AS(seab_attention(x, p), ContractError);
  CHECK_THROWS_AS(seab_attention(random_tensor<double>({1, 2, 5, 5}, rng), SeabParams<double>(1, 1, 2)),
                  ContractError);
}

TEST_CASE("seab gating") {
  Prng rng(3);
  SeabParams<double> p(8, 2, 2);
  randomize_all(p, rng);
  auto x = random_tensor<double>({1, 8, 4, 4}, rng);
  auto gated = seab_forward(x, Tensor<double>::ones({1, 1, 4, 4}), p);
  auto ungated = seab_forward(x, Tensor<double>{}, p);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(gated.data()[i] == ungated.data()[i]);

  SeabParams<double> zero_ffn = p;
  zero_ffn.ffn = FeedForward<double>(8, 2, true);
  auto dark = seab_forward(x, Tensor<double>::zeros({1, 1, 4, 4}), zero_ffn);
  auto residual = seab_attention(x, zero_ffn);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(dark.data()[i] == residual.data()[i]);

  CHECK_THROWS_AS(seab_forward(x, Tensor<double>::ones({1, 1, 4, 2}), p), ContractError);
}

TEST_CASE("seab end-to-end gradient check") {
  Prng rng(4);
  SeabParams<double> p(4, 2, 2);
  randomize_all(p, rng);
  auto x = random_tensor<double>({1, 4, 4, 4}, rng);
  auto light = random_tensor<double>({1, 1, 4, 4}, rng);
  auto all = collect(p);
  all.push_back(x);
  all.push_back(light);
  auto loss = [&] { return dlen::testing::project(seab_forward(x, light, p), 3); };
  CHECK(dlen::testing::param_gradient_error(loss, all, 30, 5) < 1e-4);
}

TEST_CASE("seb_forward shapes, latent and init identity") {
  Prng rng(5);
  SebParams<double> fresh(8, {1, 1, 2, 2}, {1, 2, 4, 8}, 2, 2);
  for (std::size_t s : {16, 24, 32}) {
    auto x = random_tensor<double>({2, 3, s, s}, rng);
    SebTrace<double> trace;
    auto out = seb_forward(x, fresh, &trace);
    CHECK(out.shape() == Shape{2, 3, s, s});
    CHECK(trace.latent.shape() == Shape{2, 64, s / 8, s / 8});
    CHECK(trace.decoded.shape() == Shape{2, 16, s, s});
    for (double v : out.data()) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(seb_forward(random_tensor<double>({1, 3, 12, 16}, rng), fresh), ContractError);
}

TEST_CASE("seb end-to-end gradient check") {
  Prng rng(6);
  SebParams<double> p(2, {1, 1, 1, 1}, {1, 2, 4, 8}, 1, 2);
  randomize_all(p, rng, 0.4);
  auto x = random_tensor<double>({1, 3, 8, 8}, rng);
  auto all = collect(p);
  all.push_back(x);
  auto loss = [&] { return dlen::testing::project(seb_forward(x, p), 9); };
  CHECK(dlen::testing::param_gradient_error(loss, all, 8, 6) < 1e-4);
}
