#include <doctest.h>

#include <cmath>
#include <vector>

#include "arflow/datagen.hpp"
#include "arflow/eval.hpp"
#include "oracles.hpp"

using namespace arflow;

namespace {

Matrix zscored(const Matrix& M) { return zscore_columns(M); }

Matrix permute_columns(const Matrix& M, const std::vector<std::size_t>& perm, const std::vector<int>& signs) {
  Matrix out(M.rows(), M.cols());
  for (std::size_t j = 0; j < M.cols(); ++j) {
    auto c = M.col(perm[j]);
    for (double& v : c) v *= signs[j];
    out.set_col(j, c);
  }
  return out;
}

}  // namespace

TEST_CASE("pearson") {
  const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8}, z = {4, 3, 2, 1};
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, z) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(x, std::vector<double>(4, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(pearson(x, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST_CASE("match_sources examples") {
  oracle::Rng rng(1);
  const Matrix truth = zscored(rng.matrix(200, 3));
  SUBCASE("identity") {
    const auto rep = match_sources(truth, truth);
    CHECK(rep.permutation == std::vector<std::size_t>{0, 1, 2});
    for (double c : rep.per_source_abs_corr) CHECK(c == doctest::Approx(1.0));
    CHECK(rep.mean_abs_corr == doctest::Approx(1.0));
  }
  SUBCASE("negated and swapped") {
    const Matrix t2 = zscored(rng.matrix(200, 2));
    const Matrix rec = permute_columns(t2, {1, 0}, {-1, -1});
    const auto rep = match_sources(rec, t2);
    CHECK(rep.permutation == std::vector<std::size_t>{1, 0});
    CHECK(rep.signs == std::vector<int>{-1, -1});
    for (double c : rep.per_source_abs_corr) CHECK(c == doctest::Approx(1.0));
  }
  SUBCASE("additive noise") {
    const Matrix t = zscored(rng.matrix(512, 3));
    Matrix rec = permute_columns(t, {2, 0, 1}, {1, 1, 1});
    for (double& v : rec.data()) v += rng.normal(0.5);
    const auto rep = match_sources(rec, t);
    CHECK(rep.permutation == std::vector<std::size_t>{2, 0, 1});
    const double expect = 1.0 / std::sqrt(1.25);
    for (double c : rep.per_source_abs_corr) CHECK(std::abs(c - expect) < 0.03);
    CHECK(rep.overall_max_corr >= *std::max_element(rep.per_source_abs_corr.begin(), rep.per_source_abs_corr.end()));
  }
  SUBCASE("constant column") {
    Matrix rec = truth;
    for (std::size_t r = 0; r < rec.rows(); ++r) rec(r, 1) = 3.0;
    CHECK_THROWS_AS(match_sources(rec, truth), std::invalid_argument);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(match_sources(Matrix(200, 2, 1.0), truth), std::invalid_argument);
  }
}

TEST_CASE("match_sources is invariant under permutation and sign flips of the recovered columns") {
  oracle::Rng rng(2);
  const Matrix truth = zscored(rng.matrix(300, 4));
  Matrix rec = truth;
  for (double& v : rec.data()) v += rng.normal(0.8);
  const auto base = match_sources(rec, truth);
  const std::vector<std::size_t> perm = {3, 1, 0, 2};
  const std::vector<int> signs = {-1, 1, -1, -1};
  const auto rep = match_sources(permute_columns(rec, perm, signs), truth);
  CHECK(rep.mean_abs_corr == doctest::Approx(base.mean_abs_corr).epsilon(1e-14));
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(rep.permutation[j] == base.permutation[perm[j]]);
    CHECK(rep.signs[j] == signs[j] * base.signs[perm[j]]);
    CHECK(rep.per_source_abs_corr[j] == doctest::Approx(base.per_source_abs_corr[perm[j]]).epsilon(1e-14));
  }
}

TEST_CASE("mean_abs_corr is invariant under positive affine rescaling") {
  oracle::Rng rng(3);
  const Matrix truth = rng.matrix(150, 3);
  Matrix rec = truth;
  for (double& v : rec.data()) v += rng.normal(0.7);
  const double base = match_sources(rec, truth).mean_abs_corr;
  Matrix scaled = rec, tscaled = truth;
  for (std::size_t r = 0; r < rec.rows(); ++r) {
    for (std::size_t j = 0; j < 3; ++j) {
      scaled(r, j) = (j + 1) * 2.5 * rec(r, j) - 4.0 * j;
      tscaled(r, j) = 0.1 * truth(r, j) + 9.0;
    }
  }
  CHECK(match_sources(scaled, truth).mean_abs_corr == doctest::Approx(base).epsilon(1e-12));
  CHECK(match_sources(rec, tscaled).mean_abs_corr == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ties resolve to the lexicographically smallest permutation") {
  // Two identical truth columns make both assignments score the same.
  oracle::Rng rng(4);
  const auto c = rng.normals(50);
  Matrix truth(50, 2);
  truth.set_col(0, c);
  truth.set_col(1, c);
  const auto rep = match_sources(truth, truth);
  CHECK(rep.permutation == std::vector<std::size_t>{0, 1});
}

TEST_CASE("normal quantile") {
  CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-5);
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("ci_report examples") {
  oracle::Rng rng(5);
  const Matrix M = rng.matrix(100, 2);
  SUBCASE("truth equal to the means is always covered") {
    const std::vector<double> log_q = {-3.0, 0.5};
    const auto rep = ci_report(M, log_q, M, 0.95);
    for (double c : rep.coverage) CHECK(c == 1.0);
    CHECK(rep.z == doctest::Approx(1.959964).epsilon(1e-6));
  }
  SUBCASE("vanishing intervals cover nothing") {
    Matrix truth = M;
    for (double& v : truth.data()) v += rng.normal(0.1);
    const std::vector<double> log_q = {-70.0, -70.0};
    const auto rep = ci_report(M, log_q, truth, 0.95);
    for (double c : rep.coverage) CHECK(c == 0.0);
  }
  SUBCASE("level must be inside (0, 1)") {
    const std::vector<double> log_q = {0.0, 0.0};
    CHECK_THROWS_AS(ci_report(M, log_q, M, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ci_report(M, log_q, M, 0.0), std::invalid_argument);
  }
  SUBCASE("frame follows the matched sign") {
    Matrix neg = M;
    for (double& v : neg.data()) v = -v;
    const std::vector<double> log_q = {-2.0, -2.0};
    const auto rep = ci_report(neg, log_q, M, 0.95);
    CHECK(rep.match.signs == std::vector<int>{-1, -1});
    for (double c : rep.coverage) CHECK(c == 1.0);
    for (std::size_t r = 0; r < 100; ++r) {
      CHECK(rep.lower(r, 0) <= rep.mean(r, 0));
      CHECK(rep.mean(r, 0) <= rep.upper(r, 0));
      CHECK(std::abs(rep.mean(r, 0) - rep.truth(r, 0)) < 1e-12);
    }
  }
}

TEST_CASE("ci_report is calibrated on synthetic data") {
  // Means with spread far above sqrt(q) so the two Z-score maps agree.
  oracle::Rng rng(6);
  const std::size_t R = 10000;
  const Matrix M = rng.matrix(R, 2, 30.0);
  const std::vector<double> log_q = {0.0, std::log(2.0)};
  Matrix truth = M;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < 2; ++j) truth(r, j) += rng.normal(std::exp(0.5 * log_q[j]));
  }
  const auto rep = ci_report(M, log_q, truth, 0.95);
  for (double c : rep.coverage) CHECK(std::abs(c - 0.95) < 0.01);
}
