#include "doctest.h"
#include "dlen/ilb.hpp"
#include "test_util.hpp"

using namespace dlen;
using dlen::testing::random_tensor;

namespace {

template <typename P>
void randomize_all(P& params, Prng& rng, double scale = 0.5) {
  params.visit("p", [&](const std::string& name, Tensor<double>& t, const InitSpec&) {
    dlen::testing::randomize(t, rng, scale);
    // Keep temperatures and norm scales away from zero.
    if (name.ends_with("alpha") || name.ends_with("gamma")) {
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

TEST_CASE("ig_attention columns are convex weights") {
  Prng rng(1);
  MiabParams<double> p(8, 2, 2, 4, 4);
  randomize_all(p, rng);
  auto x = random_tensor<double>({2, 8, 4, 4}, rng);
  auto y = random_tensor<double>({2, 8, 4, 4}, rng);
  std::vector<Tensor<double>> maps;
  ig_attention(x, y, p, &maps);
  REQUIRE(maps.size() == 1);
  const auto& a = maps[0];
  CHECK(a.shape() == Shape{2, 2, 4, 4});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t col = 0; col < 4; ++col) {
        double s = 0.0;
        for (std::size_t row = 0; row < 4; ++row) s += a.at({b, h, row, col});
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
}

TEST_CASE("ig_attention hand cases") {
  Prng rng(2);
  MiabParams<double> p(4, 4, 2, 3, 3);  // d_k = 1
  randomize_all(p, rng);
  auto x = random_tensor<double>({1, 4, 3, 3}, rng);
  auto y = random_tensor<double>({1, 4, 3, 3}, rng);
  auto heads = ig_attention_heads(x, y, p);
  auto v = p.wv(x);
  for (std::size_t i = 0; i < heads.numel(); ++i) {
    CHECK(heads.data()[i] == doctest::Approx(y.data()[i] * v.data()[i]).epsilon(1e-14));
  }

  MiabParams<double> q(6, 2, 2, 3, 3);
  randomize_all(q, rng);
  auto x6 = random_tensor<double>({1, 6, 3, 3}, rng);
  auto ones = Tensor<double>::ones({1, 6, 3, 3});
  auto gated = ig_attention_heads(x6, ones, q);
  // Unit light: the head output is plain V A.
  std::vector<Tensor<double>> maps;
  ig_attention_heads(x6, ones, q, &maps);
  auto v6 = q.wv(x6);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t pix = 0; pix < 9; ++pix) {
        double expect = 0.0;
        for (std::size_t a = 0; a < 3; ++a) {
          expect += maps[0].at({0, h, a, b}) * v6.data()[(h * 3 + a) * 9 + pix];
        }
        CHECK(gated.data()[(h * 3 + b) * 9 + pix] == doctest::Approx(expect).epsilon(1e-12));
      }

  for (auto& v : q.alpha.mutable_data()) v = 0.0;
  CHECK_THROWS_AS(ig_attention(x6, ones, q), ContractError);
  CHECK_THROWS_AS(ig_attention(x6, Tensor<double>::ones({1, 6, 3, 2}), q), ContractError);
}

TEST_CASE("multi-head attention agrees with single-head blocks on each subspace") {
  for (std::size_t d : {1, 2}) {
    Prng rng(30 + d);
    const std::size_t k = 3, c = k * d;
    MiabParams<double> multi(c, k, 2, 4, 4);
    randomize_all(multi, rng);
    auto x = random_tensor<double>({2, c, 4, 4}, rng);
    auto y = random_tensor<double>({2, c, 4, 4}, rng);
    auto joint = ig_attention_heads(x, y, multi);
    for (std::size_t h = 0; h < k; ++h) {
      MiabParams<double> single(d, 1, 2, 4, 4);
      for (auto [dst, src] : {std::pair{&single.wq, &multi.wq}, std::pair{&single.wk, &multi.wk},
                              std::pair{&single.wv, &multi.wv}}) {
        auto out = dst->weight.mutable_data();
        for (std::size_t i = 0; i < d * d; ++i) out[i] = src->weight.data()[h * d * d + i];
      }
      single.alpha.mutable_data()[0] = multi.alpha.data()[h];
      auto part = ig_attention_heads(slice(x, 1, h * d, d), slice(y, 1, h * d, d), single);
      auto ref = slice(joint, 1, h * d, d);
      CHECK(dlen::testing::max_abs_diff<double>(part.data(), ref.data()) < 1e-13);
    }
  }
}

TEST_CASE("miab_forward shapes and residual identity") {
  Prng rng(3);
  for (std::size_t c : {4, 8, 16}) {
    MiabParams<double> p(c, c / 4, 2, 4, 4);
    randomize_all(p, rng);
    auto x = random_tensor<double>({1, c, 4, 4}, rng);
    CHECK(miab_forward(x, random_tensor<double>({1, c, 4, 4}, rng), p).shape() == x.shape());
  }
  MiabParams<double> zero(4, 2, 2, 4, 4);  // fresh projections are zero-filled
  auto x = random_tensor<double>({2, 4, 4, 4}, rng);
  auto out = miab_forward(x, random_tensor<double>({2, 4, 4, 4}, rng), zero);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(out.data()[i] == x.data()[i]);
  CHECK_THROWS_AS(miab_forward(x, random_tensor<double>({2, 4, 4, 2}, rng), zero), ContractError);
}

TEST_CASE("positional encoding is resized away from the training resolution") {
  Prng rng(4);
  MiabParams<double> p(4, 2, 2, 4, 4);
  randomize_all(p, rng);
  auto x = random_tensor<double>({1, 4, 8, 6}, rng);
  CHECK(miab_forward(x, random_tensor<double>({1, 4, 8, 6}, rng), p).shape() == x.shape());
}

TEST_CASE("miab gradients match finite differences") {
  Prng rng(5);
  MiabParams<double> p(4, 2, 2, 3, 3);
  randomize_all(p, rng);
  auto x = random_tensor<double>({1, 4, 3, 3}, rng);
  auto y = random_tensor<double>({1, 4, 3, 3}, rng);
  auto all = collect(p);
  all.push_back(x);
  all.push_back(y);
  auto loss = [&] { return dlen::testing::project(miab_forward(x, y, p), 7); };
  CHECK(dlen::testing::param_gradient_error(loss, all, 30, 2) < 1e-4);
  bool alpha_moves = false;
  for (double g : p.alpha.grad()) alpha_moves |= g != 0.0;
  CHECK(alpha_moves);
}

TEST_CASE("ilb_forward contracts") {
  Prng rng(6);
  IlbParams<double> fresh(16, {1, 2, 2}, {1, 2, 4}, 2, 16, 16);
  auto i_lu = random_tensor<double>({1, 3, 16, 16}, rng);
  auto f_lu = random_tensor<double>({1, 16, 16, 16}, rng);
  auto out = ilb_forward(i_lu, f_lu, fresh);
  CHECK(out.shape() == Shape{1, 3, 16, 16});
  for (double v : out.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(ilb_forward(random_tensor<double>({1, 3, 10, 16}, rng),
                              random_tensor<double>({1, 16, 10, 16}, rng), fresh),
                  ContractError);
  CHECK_THROWS_AS(ilb_forward(i_lu, random_tensor<double>({1, 8, 16, 16}, rng), fresh),
                  ContractError);
}

TEST_CASE("ilb end-to-end gradient check") {
  Prng rng(7);
  IlbParams<double> p(4, {1, 1, 1}, {1, 2, 4}, 2, 8, 8);
  randomize_all(p, rng, 0.4);
  auto i_lu = random_tensor<double>({1, 3, 8, 8}, rng);
  auto f_lu = random_tensor<double>({1, 4, 8, 8}, rng);
  auto all = collect(p);
  all.push_back(i_lu);
  all.push_back(f_lu);
  auto loss = [&] { return dlen::testing::project(ilb_forward(i_lu, f_lu, p), 8); };
  CHECK(dlen::testing::param_gradient_error(loss, all, 12, 4) < 1e-4);
}
