#include <doctest.h>

#include <cmath>
#include <vector>

#include "arflow/eval.hpp"
#include "arflow/prior.hpp"
#include "checks.hpp"
#include "oracles.hpp"

using namespace arflow;

TEST_CASE("flow_heads examples") {
  PriorParams p = PriorParams::identity(4);
  const std::vector<double> h0(4, 0.0);
  SUBCASE("zero state and biases") {
    const auto fh = flow_heads(std::span<const double>(h0), p.view());
    CHECK(fh.b == 0.0);
    CHECK(fh.alpha == 0.0);
  }
  SUBCASE("bias passthrough") {
    p.c_b = 1.5;
    CHECK(flow_heads(std::span<const double>(h0), p.view()).b == 1.5);
  }
  SUBCASE("log-scale saturates below the bound") {
    oracle::Rng rng(1);
    p.w_alpha = rng.normals(4);
    const std::vector<double> h = rng.normals(4, 0.3);
    double dot = 0.0;
    for (std::size_t i = 0; i < 4; ++i) dot += p.w_alpha[i] * h[i];
    p.c_alpha = 10.0 - dot;
    const double alpha = flow_heads(std::span<const double>(h), p.view()).alpha;
    CHECK(alpha == doctest::Approx(0.8 * std::tanh(10.0)).epsilon(1e-12));
    CHECK(alpha < 0.8);
  }
}

TEST_CASE("hidden_update examples") {
  PriorParams p = PriorParams::identity(3);
  const std::vector<double> h0(3, 0.0);
  SUBCASE("weight-free case gives tanh of the bias") {
    p.c_eps = {0.2, -1.0, 3.0};
    const auto h = hidden_update(std::span<const double>(h0), 1.7, p.view());
    for (std::size_t i = 0; i < 3; ++i) CHECK(h[i] == std::tanh(p.c_eps[i]));
  }
  SUBCASE("all-zero parameters keep the state at zero") {
    const auto h = hidden_update(std::span<const double>(h0), -4.2, p.view());
    for (double v : h) CHECK(v == 0.0);
  }
  SUBCASE("state stays in (-1, 1)") {
    oracle::Rng rng(2);
    for (int d = 0; d < 1000; ++d) {
      const PriorParams q = oracle::random_prior(3, rng, 2.0);
      const std::vector<double> h_prev = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      for (double v : hidden_update(std::span<const double>(h_prev), 0.3, q.view())) {
        CHECK(std::abs(v) < 1.0);
      }
    }
  }
}

TEST_CASE("inverse_flow examples") {
  PriorParams p = PriorParams::identity(4);
  SUBCASE("identity flow returns the trajectory") {
    const std::vector<double> s = {0.4, -1.0, 2.5, 0.1};
    const auto tr = inverse_flow(std::span<const double>(s), p.view());
    REQUIRE(tr.eps.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) CHECK(tr.eps[r] == s[r + 1]);
  }
  SUBCASE("constant shift") {
    p.c_b = 1.0;
    const std::vector<double> s = {-7.0, 3.0, 3.0};
    const auto tr = inverse_flow(std::span<const double>(s), p.view());
    CHECK(tr.eps[0] == 2.0);
    CHECK(tr.eps[1] == 2.0);
  }
  SUBCASE("too short") {
    const std::vector<double> s = {1.0};
    CHECK_THROWS_AS(inverse_flow(std::span<const double>(s), p.view()), std::invalid_argument);
  }
}

TEST_CASE("sample_prior examples") {
  PriorParams p = PriorParams::identity(4);
  SUBCASE("identity reduction") {
    const std::vector<double> eps = {0.5, -1.5, 2.0};
    const auto s = sample_prior(p.view(), 4, eps, 0.25);
    CHECK(s == std::vector<double>{0.25, 0.5, -1.5, 2.0});
  }
  SUBCASE("AR(1) autocorrelation") {
    p.a = 0.9;
    oracle::Rng rng(3);
    const std::size_t R = 10000;
    const auto s = sample_prior(p.view(), R, rng.normals(R - 1), rng.normal());
    CHECK(std::abs(lag_autocorrelation(s, 1) - 0.9) < 0.02);
  }
  SUBCASE("noise length must be R - 1") {
    const std::vector<double> eps = {0.5};
    CHECK_THROWS_AS(sample_prior(p.view(), 4, eps, 0.0), std::invalid_argument);
  }
}

TEST_CASE("log_prior_source examples") {
  PriorParams p = PriorParams::identity(8);
  SUBCASE("two standard normals at zero") {
    const std::vector<double> s = {0.0, 0.0};
    CHECK(log_prior_source(std::span<const double>(s), p.view()) == doctest::Approx(-1.837877).epsilon(1e-6));
  }
  SUBCASE("AR step with a non-unit scale") {
    p.a = 0.5;
    p.log_sigma = std::log(2.0);
    const std::vector<double> s = {1.0, 0.5};
    CHECK(log_prior_source(std::span<const double>(s), p.view()) == doctest::Approx(-3.031025).epsilon(1e-6));
  }
  SUBCASE("single entry rejected") {
    const std::vector<double> s = {0.0};
    CHECK_THROWS_AS(log_prior_source(std::span<const double>(s), p.view()), std::invalid_argument);
  }
  SUBCASE("integrates to one") {
    CHECK(checks::normalization_error(3, 400, 8, 4) < 1e-3);
  }
}

TEST_CASE("log_prior examples") {
  oracle::Rng rng(5);
  const PriorParams p1 = oracle::random_prior(4, rng), p2 = oracle::random_prior(4, rng),
                    p3 = oracle::random_prior(4, rng);
  const Matrix S = rng.matrix(10, 3);
  auto col = [&](std::size_t j) { return S.col(j); };
  SUBCASE("single source") {
    Matrix S1(10, 1);
    S1.set_col(0, col(0));
    const PriorView<double> v[1] = {p1.view()};
    const auto c0 = col(0);
    CHECK(log_prior(S1, std::span<const PriorView<double>>(v)) ==
          log_prior_source(std::span<const double>(c0), p1.view()));
  }
  SUBCASE("identical columns add") {
    Matrix S2(10, 2);
    S2.set_col(0, col(0));
    S2.set_col(1, col(0));
    const PriorView<double> v[2] = {p1.view(), p1.view()};
    const auto c0 = col(0);
    CHECK(log_prior(S2, std::span<const PriorView<double>>(v)) ==
          2.0 * log_prior_source(std::span<const double>(c0), p1.view()));
  }
  SUBCASE("three sources against per-column summation") {
    const PriorView<double> v[3] = {p1.view(), p2.view(), p3.view()};
    double expect = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const auto c = col(j);
      expect += log_prior_source(std::span<const double>(c), v[j]);
    }
    CHECK(std::abs(log_prior(S, std::span<const PriorView<double>>(v)) - expect) < 1e-12);
  }
  SUBCASE("column count mismatch") {
    const PriorView<double> v[2] = {p1.view(), p2.view()};
    CHECK_THROWS_AS(log_prior(S, std::span<const PriorView<double>>(v)), std::invalid_argument);
  }
}

TEST_CASE("sampling then inverting recovers the driving noise") {
  CHECK(checks::flow_roundtrip_error(200, 64, 8, 6) < 1e-10);
}

TEST_CASE("Jacobian of s -> eps is triangular with the analytic log-determinant") {
  const auto res = checks::jacobian_check(3, 6, 5, 8, 7);
  CHECK(res.max_upper < 1e-6);
  CHECK(res.max_logdet < 1e-5);
}

TEST_CASE("zero flow reduces to a Gaussian AR(1) chain") {
  CHECK(checks::gaussian_reduction_error(100, 8, 8) < 1e-8);
}

TEST_CASE("log-scales stay inside the bound") {
  oracle::Rng rng(9);
  for (int d = 0; d < 200; ++d) {
    const PriorParams p = oracle::random_prior(8, rng, 0.5);
    const std::vector<double> s = rng.normals(30, 3.0);
    for (double a : inverse_flow(std::span<const double>(s), p.view()).alpha) {
      CHECK(std::abs(a) < 0.8);
    }
  }
  // Huge pre-activations round tanh to exactly 1, so the bound is reached
  // but never exceeded.
  for (int d = 0; d < 200; ++d) {
    const PriorParams p = oracle::random_prior(8, rng, 30.0);
    const std::vector<double> s = rng.normals(30, 3.0);
    for (double a : inverse_flow(std::span<const double>(s), p.view()).alpha) {
      CHECK(std::abs(a) <= 0.8);
    }
  }
}

TEST_CASE("density evaluation is causal") {
  oracle::Rng rng(10);
  const PriorParams p = oracle::random_prior(8, rng);
  const std::vector<double> s = rng.normals(20);
  const auto full = inverse_flow(std::span<const double>(s), p.view());
  for (std::size_t r = 2; r < 20; ++r) {
    const std::vector<double> head(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(r));
    const auto part = inverse_flow(std::span<const double>(head), p.view());
    for (std::size_t i = 0; i < part.eps.size(); ++i) CHECK(part.eps[i] == full.eps[i]);
  }
}

TEST_CASE("tape evaluation matches plain evaluation") {
  oracle::Rng rng(11);
  const PriorParams p = oracle::random_prior(4, rng);
  const std::vector<double> s = rng.normals(12);
  ad::Tape tape;
  std::vector<ad::Var> sv;
  for (double x : s) sv.push_back(tape.lift(x));
  std::vector<ad::Var> W_h, W_eps, c_eps, w_b, w_alpha;
  for (double x : p.W_h) W_h.push_back(tape.lift(x));
  for (double x : p.W_eps) W_eps.push_back(tape.lift(x));
  for (double x : p.c_eps) c_eps.push_back(tape.lift(x));
  for (double x : p.w_b) w_b.push_back(tape.lift(x));
  for (double x : p.w_alpha) w_alpha.push_back(tape.lift(x));
  PriorView<ad::Var> v;
  v.H = 4;
  v.a = tape.lift(p.a);
  v.log_sigma = tape.lift(p.log_sigma);
  v.log_sigma0 = tape.lift(p.log_sigma0);
  v.W_h = W_h;
  v.W_eps = W_eps;
  v.c_eps = c_eps;
  v.w_b = w_b;
  v.w_alpha = w_alpha;
  v.c_b = tape.lift(p.c_b);
  v.c_alpha = tape.lift(p.c_alpha);
  const ad::Var lp = log_prior_source(std::span<const ad::Var>(sv), v);
  CHECK(lp.value() == doctest::Approx(log_prior_source(std::span<const double>(s), p.view())).epsilon(1e-14));
}
