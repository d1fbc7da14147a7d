#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nullspace/analysis.hpp"
#include "nullspace/operators.hpp"
#include "test_helpers.hpp"

using namespace nullspace;
using namespace nullspace::testing;

TEST_CASE("repulsion_experiment") {
  SUBCASE("2x2 zero matrix has the closed-form gap eps |d1 - d2|") {
    const SparseMatrix zero = csr_from_triplets({}, 2, 2);
    const double eps = 1e-2;
    const RepulsionReport rep = repulsion_experiment(zero, eps, 20, 5);
    CHECK(rep.nullity == 2);
    for (std::size_t trial = 0; trial < 20; ++trial) {
      CounterRng rng(5, trial);
      const double d1 = rng.uniform();
      const double d2 = rng.uniform();
      CHECK(rep.min_gaps[trial] ==
            doctest::Approx(eps * std::abs(d1 - d2)).epsilon(1e-9));
    }
  }

  SUBCASE("doubling eps doubles every gap for the zero matrix") {
    const SparseMatrix zero = csr_from_triplets({}, 6, 6);
    const RepulsionReport r1 = repulsion_experiment(zero, 1e-3, 15, 7);
    const RepulsionReport r2 = repulsion_experiment(zero, 2e-3, 15, 7);
    for (std::size_t i = 0; i < 15; ++i)
      CHECK(r2.min_gaps[i] == doctest::Approx(2.0 * r1.min_gaps[i]).epsilon(1e-9));
  }

  SUBCASE("diagonal null-block matrix: positive gaps and positive low quantile") {
    const SparseMatrix a = diagonal_with_null_block();
    const double eps = std::pow(2.0, -20);
    const RepulsionReport rep = repulsion_experiment(a, eps, 40, 11);
    CHECK(rep.nullity == 21);
    std::size_t positive = 0;
    for (double g : rep.min_gaps)
      if (g > 0.0) ++positive;
    CHECK(positive >= 38);
    CHECK(rep.quantiles.front().second > 0.0);
    CHECK(rep.quantiles.front().second <= rep.quantiles.back().second);
  }

  SUBCASE("nullity below two throws") {
    const SparseMatrix a = SparseMatrix::identity(5);
    CHECK_THROWS_AS(repulsion_experiment(a, 1e-3, 5, 3), std::invalid_argument);
  }
}

TEST_CASE("vandermonde ratio and bound") {
  SUBCASE("t = 1 closed form") {
    std::vector<double> eigs = {0.0, 0.1, 0.5, 1.0, 2.0, 3.0};
    const double ratio = vandermonde_ratio(eigs, 3, 1);
    CHECK(ratio == doctest::Approx(std::sqrt(3.0 / 3.0)).epsilon(1e-12));
    CHECK(vandermonde_bound(eigs, 3, 1) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(ratio <= vandermonde_bound(eigs, 3, 1));
  }

  SUBCASE("five-point spectrum with t = 2") {
    std::vector<double> eigs = {0.0, 0.5, 1.0, 2.0, 3.0};
    const double ratio = vandermonde_ratio(eigs, 2, 2);
    CHECK(ratio <= vandermonde_bound(eigs, 2, 2));
  }

  SUBCASE("never violated over random strict spectra") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      CounterRng rng(300 + trial, 0);
      const std::size_t n = 15 + rng.next_u64() % 60;
      const std::size_t nullity = 2 + rng.next_u64() % 4;
      std::vector<double> eigs(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        v += 1e-3 + rng.uniform();
        eigs[i] = v;
      }
      for (std::size_t t = 1; t <= std::min<std::size_t>(3, nullity); ++t)
        CHECK(vandermonde_ratio(eigs, nullity, t) <=
              vandermonde_bound(eigs, nullity, t) * (1.0 + 1e-10));
    }
  }

  SUBCASE("repeated leading eigenvalues throw") {
    std::vector<double> eigs = {0.5, 0.5, 1.0, 2.0};
    CHECK_THROWS_AS(vandermonde_ratio(eigs, 2, 1), std::invalid_argument);
  }
}

TEST_CASE("krylov_angle_trace") {
  SUBCASE("starts at ratio one and decays under a huge gap") {
    // lambda_{N+1} / lambda_N >= 1e6 with a narrow outer spectrum: the
    // Chebyshev argument 1 + 2(l_{N+1}-l_N)/(l_n-l_{N+1}) is ~11, so one
    // step shrinks the angle by an order of magnitude.
    std::vector<double> eigs = {1e-7, 2e-7, 1.0, 1.02, 1.05, 1.08, 1.1, 1.13, 1.16, 1.2};
    const SparseMatrix a = planted_spsd(10, eigs, 41);
    CounterRng rng(42, 0);
    const DenseBlock omega = DenseBlock::gaussian(10, 1, rng);
    const AngleTrace trace = krylov_angle_trace(to_dense(a), omega, 2, 2, 5);
    REQUIRE(trace.tan_angles.size() >= 2);
    CHECK(trace.bound_ratios[0] == doctest::Approx(1.0));
    CHECK(trace.tan_angles[1] <= 0.1 * trace.tan_angles[0]);
  }

  SUBCASE("chebyshev decay bound holds on random instances") {
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
      CounterRng rng(500 + trial, 0);
      const std::size_t n = 40 + trial * 20;
      const std::size_t nullity = 2 + trial % 3;
      std::vector<double> eigs(n);
      for (std::size_t i = 0; i < nullity; ++i)
        eigs[i] = 1e-3 * (1.0 + static_cast<double>(i));
      for (std::size_t i = nullity; i < n; ++i)
        eigs[i] = 1.0 + 2.0 * static_cast<double>(i - nullity) / static_cast<double>(n);
      const SparseMatrix a = planted_spsd(n, eigs, 600 + trial);
      const DenseBlock omega = DenseBlock::gaussian(n, 1, rng);
      const std::size_t t = nullity;
      const AngleTrace trace = krylov_angle_trace(to_dense(a), omega, nullity, t, t + 10);
      REQUIRE(trace.tan_angles.size() >= 2);
      for (std::size_t i = 0; i < trace.tan_angles.size(); ++i)
        CHECK(trace.tan_angles[i] <=
              trace.tan_angles[0] * trace.bound_ratios[i] * (1.0 + 1e-8) + 1e-13);
    }
  }

  SUBCASE("exactly degenerate leading eigenvalues throw") {
    // A literal diagonal keeps the zero pair exactly tied through the solver.
    const SparseMatrix a = SparseMatrix::diagonal({0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    CounterRng rng(44, 0);
    CHECK_THROWS_AS(krylov_angle_trace(to_dense(a), DenseBlock::gaussian(8, 1, rng), 2, 2, 6),
                    std::invalid_argument);
  }
}

TEST_CASE("residual_bound_suite") {
  SUBCASE("diagonal null-block matrix: applicable checks all pass") {
    const SparseMatrix a = diagonal_with_null_block();
    const double eps = 1e-4;
    // Exact null-space basis: the first 21 coordinate vectors.
    DenseBlock v(420, 21);
    for (std::size_t j = 0; j < 21; ++j) v.at(j, j) = 1.0;
    const auto checks = residual_bound_suite(a, v, eps, 1.0, 51);
    REQUIRE(checks.size() >= 3);
    bool any_applicable = false;
    for (const BoundCheck& c : checks) {
      if (c.applicable) {
        any_applicable = true;
        CHECK(c.satisfied);
        CHECK(c.satisfied == (c.quantity <= c.bound));
      }
    }
    CHECK(any_applicable);
  }

  SUBCASE("eps to zero drives bounds and residuals to zero") {
    std::vector<double> sigma(30, 0.0);
    for (std::size_t i = 3; i < 30; ++i) sigma[i] = 1.0 + 0.05 * static_cast<double>(i);
    const SparseMatrix a = planted_singular_values(60, 30, sigma, 52);
    const SvdResult svd = thin_svd(to_dense(a));
    DenseBlock v(30, 3);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < 30; ++i) v.at(i, j) = svd.v.at(i, 27 + j);
    double prev_bound = 1.0;
    for (double eps : {1e-4, 1e-6, 1e-8}) {
      const auto checks = residual_bound_suite(a, v, eps, 1.0, 53);
      for (const BoundCheck& c : checks) {
        if (!c.applicable) continue;
        CHECK(c.satisfied);
      }
      // The end-to-end bound shrinks like eps^2.
      const BoundCheck& last = checks.back();
      CHECK(last.bound < prev_bound);
      prev_bound = last.bound;
    }
  }

  SUBCASE("corrupted basis fails at least one applicable check") {
    std::vector<double> sigma(25, 0.0);
    for (std::size_t i = 4; i < 25; ++i) sigma[i] = 1.0 + 0.1 * static_cast<double>(i);
    const SparseMatrix a = planted_singular_values(50, 25, sigma, 54);
    const SvdResult svd = thin_svd(to_dense(a));
    DenseBlock v(25, 4);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 25; ++i) v.at(i, j) = svd.v.at(i, 21 + j);
    // Replace one column by a non-null right singular vector.
    for (std::size_t i = 0; i < 25; ++i) v.at(i, 0) = svd.v.at(i, 0);
    const auto checks = residual_bound_suite(a, block_qr(v).q, 1e-4, 1.0, 55);
    bool any_failed = false;
    for (const BoundCheck& c : checks)
      if (c.applicable && !c.satisfied) any_failed = true;
    CHECK(any_failed);
  }

  SUBCASE("non-orthonormal input throws") {
    const SparseMatrix a = random_sparse(10, 6, 0.5, 56);
    DenseBlock bad(6, 2);
    bad.at(0, 0) = 2.0;
    bad.at(1, 1) = 1.0;
    CHECK_THROWS_AS(residual_bound_suite(a, bad, 1e-4, 1.0, 57), std::invalid_argument);
  }
}

TEST_CASE("csv emission") {
  SUBCASE("repulsion csv has the documented header") {
    RepulsionReport rep;
    rep.min_gaps = {1e-5, 2e-5};
    std::ostringstream out;
    write_repulsion_csv(out, rep);
    CHECK(out.str().rfind("trial,min_gap\n", 0) == 0);
    CHECK(out.str().find("0,1.000") != std::string::npos);
  }
  SUBCASE("angle trace csv has the documented header") {
    AngleTrace trace;
    trace.t = 2;
    trace.ell_first = 2;
    trace.tan_angles = {1.5, 0.5};
    trace.bound_ratios = {1.0, 0.4};
    std::ostringstream out;
    write_angle_trace_csv(out, trace);
    CHECK(out.str().rfind("ell,tan_angle,bound_ratio\n", 0) == 0);
  }
}
