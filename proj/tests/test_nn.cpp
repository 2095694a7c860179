#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ionflux/ad/grad_check.hpp"
#include "ionflux/nn/adam.hpp"
#include "ionflux/nn/checkpoint.hpp"
#include "ionflux/nn/layers.hpp"
#include "test_util.hpp"

using namespace ionflux;
using ad::NumArray;
using ad::Tape;
using ad::Var;

namespace {

nn::AttentionHead head_on(Tape& t, const NumArray& wq, const NumArray& wk, const NumArray& wv) {
  return {t.constant(wq), t.constant(wk), t.constant(wv), wq.cols()};
}

}  // namespace

TEST_CASE("attention: identical keys give uniform weights") {
  Tape t;
  auto rng = testutil::rng(1);
  Var tokens = t.constant(NumArray::matrix({{0.3, -0.1}, {0.3, -0.1}, {0.3, -0.1}}));
  auto head = head_on(t, testutil::random_array(2, 8, rng), testutil::random_array(2, 8, rng),
                      testutil::random_array(2, 8, rng));
  auto res = nn::attention(tokens, nn::TokenMask::all(3), head);
  for (double w : res.weights.value().values()) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("attention: single present token attends to itself") {
  Tape t;
  auto rng = testutil::rng(2);
  Var tokens = t.constant(NumArray::matrix({{0.0, 0.0}, {0.7, -0.4}, {0.0, 0.0}}));
  const NumArray wv = testutil::random_array(2, 8, rng);
  auto head = head_on(t, testutil::random_array(2, 8, rng), testutil::random_array(2, 8, rng), wv);
  auto res = nn::attention(tokens, nn::TokenMask::from({false, true, false}), head);
  const NumArray& w = res.weights.value();
  CHECK(w(1, 1) == 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (!(i == 1 && j == 1)) CHECK(w(i, j) == 0.0);
  const NumArray& out = res.output.value();
  for (std::size_t c = 0; c < 8; ++c) {
    const double v = 0.7 * wv(0, c) - 0.4 * wv(1, c);
    CHECK(out(1, c) == doctest::Approx(v).epsilon(1e-15));
    CHECK(out(0, c) == 0.0);
  }
}

TEST_CASE("attention: scores (0, ln 3) give weights (0.25, 0.75)") {
  Tape t;
  // W_Q reads feature 0, W_K reads feature 1, d_k = 1.
  Var tokens = t.constant(NumArray::matrix({{1.0, 0.0}, {0.0, std::log(3.0)}}));
  auto head = head_on(t, NumArray::matrix({{1.0}, {0.0}}), NumArray::matrix({{0.0}, {1.0}}),
                      NumArray::matrix({{1.0}, {1.0}}));
  auto res = nn::attention(tokens, nn::TokenMask::all(2), head);
  CHECK(res.weights.value()(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(res.weights.value()(0, 1) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("attention: all-masked input is an error") {
  Tape t;
  Var tokens = t.constant(NumArray(2, 2, 0.0));
  auto head = head_on(t, NumArray(2, 8, 0.1), NumArray(2, 8, 0.1), NumArray(2, 8, 0.1));
  CHECK_THROWS_AS(nn::attention(tokens, nn::TokenMask::from({false, false}), head), std::invalid_argument);
}

TEST_CASE("attention property: rows sum to one, absent columns exactly zero") {
  for (int trial = 0; trial < 50; ++trial) {
    auto rng = testutil::rng(200 + trial);
    std::vector<bool> present(8);
    bool any = false;
    for (auto&& p : present) {
      p = testutil::uniform(rng, 0, 1) < 0.6;
      any = any || p;
    }
    if (!any) present[3] = true;
    const auto mask = nn::TokenMask::from(present);
    Tape t;
    Var tokens = t.constant(testutil::random_array(8, 8, rng, -3, 3));
    auto head = head_on(t, testutil::random_array(8, 8, rng), testutil::random_array(8, 8, rng),
                        testutil::random_array(8, 8, rng));
    const NumArray w = nn::attention(tokens, mask, head).weights.value();
    for (std::size_t i = 0; i < 8; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        row += w(i, j);
        if (!present[j]) CHECK(w(i, j) == 0.0);
      }
      if (present[i]) CHECK(std::abs(row - 1.0) <= 1e-12);
      else CHECK(row == 0.0);
    }
  }
}

TEST_CASE("attention property: consistent relabeling permutes outputs") {
  auto rng = testutil::rng(7);
  const NumArray x = testutil::random_array(4, 8, rng);
  const NumArray pe = testutil::random_array(4, 8, rng);
  const NumArray wq = testutil::random_array(8, 8, rng), wk = testutil::random_array(8, 8, rng),
                 wv = testutil::random_array(8, 8, rng);
  auto swap_rows = [](NumArray a, std::size_t i, std::size_t j) {
    for (std::size_t c = 0; c < a.cols(); ++c) std::swap(a(i, c), a(j, c));
    return a;
  };
  auto run = [&](const NumArray& tok, const NumArray& table) {
    Tape t;
    const auto mask = nn::TokenMask::from({true, true, false, true});
    Var enc = nn::add_positional_encoding(t.constant(tok), t.constant(table), mask);
    return nn::attention(enc, mask, head_on(t, wq, wk, wv)).output.value();
  };
  const NumArray base = run(x, pe);
  const NumArray perm = run(swap_rows(x, 0, 3), swap_rows(pe, 0, 3));
  const NumArray expect = swap_rows(base, 0, 3);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(perm[i] == doctest::Approx(expect[i]).epsilon(1e-13));
}

TEST_CASE("positional encoding examples") {
  Tape t;
  const auto mask = nn::TokenMask::from({true, false, true});
  const NumArray tok = NumArray::matrix({{1, 2}, {0, 0}, {3, 4}});
  CHECK(nn::add_positional_encoding(t.constant(tok), t.constant(NumArray(3, 2, 0.0)), mask).value() == tok);

  const NumArray table = NumArray::matrix({{0.5, -1}, {9, 9}, {2, 0.25}});
  const NumArray out =
      nn::add_positional_encoding(t.constant(NumArray(3, 2, 0.0)), t.constant(table), nn::TokenMask::all(3)).value();
  CHECK(out == table);

  const NumArray masked = nn::add_positional_encoding(t.constant(NumArray(3, 2, 0.0)), t.constant(table), mask).value();
  CHECK(masked(1, 0) == 0.0);
  CHECK(masked(1, 1) == 0.0);
}

TEST_CASE("mlp_forward") {
  const std::vector<std::size_t> widths{6, 5, 4, 4, 3, 2};
  auto layers_on = [&](Tape& t, const nn::ParamStore& p) {
    auto v = p.bind(t, true);
    std::vector<nn::LinearLayer> layers;
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) layers.push_back({v[i], v[i + 1]});
    return layers;
  };
  std::vector<nn::ParamSpec> specs;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    specs.push_back({"W" + std::to_string(l), widths[l + 1], widths[l], widths[l], nn::InitKind::Weight});
    specs.push_back({"b" + std::to_string(l), 1, widths[l + 1], 1, nn::InitKind::Weight, true});
  }

  SUBCASE("zero parameters give zero output") {
    nn::ParamStore p = nn::init_params(specs, 0);
    for (std::size_t i = 0; i < p.size(); ++i) p.entry(i).value.fill(0.0);
    Tape t;
    auto rng = testutil::rng(1);
    Var y = nn::mlp_forward(t.constant(testutil::random_array(1, 6, rng)), layers_on(t, p));
    for (double v : y.value().values()) CHECK(v == 0.0);
  }
  SUBCASE("identity-like chain maps 0 to 0") {
    std::vector<nn::ParamSpec> narrow;
    for (int l = 0; l < 5; ++l) {
      narrow.push_back({"W" + std::to_string(l), 1, 1, 1});
      narrow.push_back({"b" + std::to_string(l), 1, 1, 1, nn::InitKind::Zero, true});
    }
    nn::ParamStore p = nn::init_params(narrow, 0);
    for (int l = 0; l < 5; ++l) p.value("W" + std::to_string(l)).fill(1.0);
    Tape t;
    CHECK(nn::mlp_forward(t.constant(NumArray(1, 1, 0.0)), layers_on(t, p)).value()[0] == 0.0);
  }
  SUBCASE("matches a straight-line reimplementation") {
    nn::ParamStore p = nn::init_params(specs, 42);
    for (std::size_t i = 1; i < p.size(); i += 2) {
      auto rng = testutil::rng(i);
      for (auto& v : p.entry(i).value.values()) v = testutil::uniform(rng);
    }
    auto rng = testutil::rng(9);
    const NumArray x = testutil::random_array(1, 6, rng);
    Tape t;
    const NumArray y = nn::mlp_forward(t.constant(x), layers_on(t, p)).value();

    std::vector<double> h(x.values().begin(), x.values().end());
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const NumArray& W = p.entry(2 * l).value;
      const NumArray& b = p.entry(2 * l + 1).value;
      std::vector<double> next(widths[l + 1]);
      for (std::size_t o = 0; o < next.size(); ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < h.size(); ++i) s += W(o, i) * h[i];
        next[o] = l + 2 < widths.size() ? std::tanh(s) : s;
      }
      h = next;
    }
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(y[i] == doctest::Approx(h[i]).epsilon(1e-14));
  }
  SUBCASE("width mismatch is a shape error") {
    nn::ParamStore p = nn::init_params(specs, 0);
    Tape t;
    CHECK_THROWS_AS(nn::mlp_forward(t.constant(NumArray(1, 5, 0.0)), layers_on(t, p)), ad::ShapeError);
  }
}

TEST_CASE("attention + MLP stack passes gradient_check") {
  std::vector<nn::ParamSpec> specs = {
      {"pe", 4, 8, 8},          {"wq", 8, 8, 8},          {"wk", 8, 8, 8},
      {"wv", 8, 8, 8},          {"W0", 6, 32, 32},        {"b0", 1, 6, 1, nn::InitKind::Weight, true},
      {"W1", 3, 6, 6},          {"b1", 1, 3, 1, nn::InitKind::Weight, true},
  };
  nn::ParamStore p = nn::init_params(specs, 3);
  auto rng = testutil::rng(4);
  const NumArray x = testutil::random_array(4, 8, rng);
  const auto mask = nn::TokenMask::from({true, false, true, true});
  auto objective = [&](Tape& t, std::span<const Var> v) {
    Var enc = nn::add_positional_encoding(t.constant(x), v[0], mask);
    auto att = nn::attention(enc, mask, {v[1], v[2], v[3], 8});
    const std::array<nn::LinearLayer, 2> layers{nn::LinearLayer{v[4], v[5]}, nn::LinearLayer{v[6], v[7]}};
    Var y = nn::mlp_forward(ad::reshape(att.output, 1, 32), layers);
    return ad::sum(ad::square(y));
  };
  auto rep = ad::gradient_check(objective, p, 1e-5, 1e-5);
  INFO("max rel err " << rep.max_rel_error);
  CHECK(rep.pass);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    nn::ParamStore p;
    p.add("w", NumArray({0.3, -0.2}));
    const nn::ParamStore before = p;
    nn::adam_step(p, p.zero_gradients());
    CHECK(p == before);
    CHECK(p.step() == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    nn::ParamStore p;
    p.add("w", NumArray({0.0}));
    nn::Gradients g{NumArray({2.0})};
    nn::adam_step(p, g, {.lr = 1e-3});
    CHECK(p.value("w")[0] == doctest::Approx(-1e-3).epsilon(1e-7));
  }
  SUBCASE("frozen arrays are untouched") {
    nn::ParamStore p;
    p.add("a", NumArray({1.0, 2.0}), true);
    p.add("b", NumArray({1.0}));
    const NumArray a0 = p.value("a");
    for (int i = 0; i < 100; ++i) nn::adam_step(p, {NumArray({5.0, -3.0}), NumArray({1.0})});
    CHECK(p.value("a") == a0);
    CHECK(p.value("b")[0] < 1.0);
  }
  SUBCASE("non-finite gradient aborts the step") {
    nn::ParamStore p;
    p.add("a", NumArray({1.0}));
    p.add("b", NumArray({1.0}));
    const nn::ParamStore before = p;
    CHECK_THROWS_AS(nn::adam_step(p, {NumArray({1.0}), NumArray({INFINITY})}), ad::NonFiniteError);
    CHECK(p == before);
    CHECK(p.step() == 0);
  }
}

TEST_CASE("init_params") {
  std::vector<nn::ParamSpec> specs = {{"W", 10, 1, 1}, {"b", 1, 10, 1, nn::InitKind::Zero, true}};
  const auto a = nn::init_params(specs, 17);
  const auto b = nn::init_params(specs, 17);
  CHECK(a == b);
  CHECK(!(a == nn::init_params(specs, 18)));
  for (double v : a.value("W").values()) CHECK(std::abs(v) <= 1.0);
  for (double v : a.value("b").values()) CHECK(v == 0.0);

  const auto big = nn::init_params(std::vector<nn::ParamSpec>{{"W", 100, 100, 1}}, 5);
  double mean = 0.0;
  for (double v : big.value("W").values()) mean += v;
  mean /= 1e4;
  const double se = (1.0 / std::sqrt(3.0)) / 100.0;
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("count_params") {
  nn::ParamStore p;
  CHECK(nn::count_params(p) == 0);
  p.add("W", NumArray(3, 4, 0.0));
  p.add("b", NumArray(std::vector<double>(4, 0.0)));
  CHECK(nn::count_params(p) == 16);
}

TEST_CASE("checkpoint round trip") {
  nn::Checkpoint c;
  auto rng = testutil::rng(8);
  c.params.add("W", testutil::random_array(3, 5, rng), true);
  c.params.add("b", NumArray({0.1, -0.0, 1e-300}));
  c.params.set_step(12);
  c.architecture = {{"model", "test"}, {"d_k", 8}};
  c.seeds = {0, 7};
  const auto dir = std::filesystem::temp_directory_path() / "ionflux_test_ckpt";
  std::filesystem::remove_all(dir);
  nn::save_checkpoint(dir / "model.json", c);
  const auto back = nn::load_checkpoint(dir / "model.json");
  CHECK(back.params == c.params);
  CHECK(back.params.step() == 12);
  CHECK(back.architecture == c.architecture);
  CHECK(back.seeds == c.seeds);
  CHECK(std::filesystem::file_size(dir / "model.json.bin") == 18 * 8);
}
