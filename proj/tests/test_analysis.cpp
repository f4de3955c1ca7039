#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "aoi/analysis.hpp"
#include "aoi/error.hpp"
#include "aoi/estimator.hpp"

using namespace aoi;

TEST_SUITE("analysis") {
  TEST_CASE("KL divergence") {
    CHECK(kl_divergence(0.3, 0.3) == 0.0);
    CHECK(kl_divergence(0.25, 0.5) == doctest::Approx(0.25 * std::log(0.5) + 0.75 * std::log(1.5)).epsilon(1e-14));
    CHECK(kl_divergence(0.25, 0.5) == doctest::Approx(0.1308).epsilon(1e-3));
    CHECK(kl_divergence(0.25, 0.75) > kl_divergence(0.25, 0.5));
    for (double x = 0.05; x < 1.0; x += 0.1) {
      for (double y = 0.05; y < 1.0; y += 0.1) CHECK(kl_divergence(x, y) >= 0.0);
    }
    CHECK_THROWS_AS(kl_divergence(0.0, 0.5), Error);
    CHECK_THROWS_AS(kl_divergence(0.5, 1.0), Error);
  }

  TEST_CASE("gap bound") {
    CHECK(gap_bound(0.25, 0.25, 7.0, 100) == 7.0);
    const double b1 = gap_bound(0.25, 0.6, 10.0, 40);
    const double b2 = gap_bound(0.25, 0.6, 10.0, 80);
    CHECK(b2 / b1 == doctest::Approx(std::exp(-kl_divergence(0.25, 0.6) * 40)).epsilon(1e-12));
    CHECK(b2 < b1);
  }

  TEST_CASE("erasure-free age cap") {
    CHECK(p0_aoi_cap(4, 0.25) == 8);
    CHECK(p0_aoi_cap(2, 0.1) == 20);
    CHECK(p0_aoi_cap(1, 1.0) == 2);
  }

  TEST_CASE("tail threshold") {
    const auto t = tail_threshold(0.02, 0.5, 0.99);
    CHECK(std::ceil(t.geometric_part) == 7.0);
    const auto near_one = tail_threshold(1.0 - 1e-9, 0.5, 0.25);
    CHECK(near_one.x == static_cast<int>(std::ceil(near_one.drift_part)));
    CHECK(near_one.drift_part == doctest::Approx(256.0));
    // logarithmic growth in 1/delta
    const double g1 = tail_threshold(1e-6, 0.5, 1.0).geometric_part;
    const double g2 = tail_threshold(1e-12, 0.5, 1.0).geometric_part;
    CHECK(g2 / g1 == doctest::Approx(2.0).epsilon(0.06));
    const auto r = tail_threshold(0.05, 0.2, 0.25);
    CHECK(r.x == 100);
    CHECK(r.aoi_threshold == 200);
    CHECK_THROWS_AS(tail_threshold(0.05, 0.0, 0.25), Error);
  }

  TEST_CASE("size conditions") {
    const auto c = size_conditions(0.05, 0.2, 0.25, 500, 100);
    CHECK(c.berry_esseen == doctest::Approx(0.3354 * 1.215 / std::sqrt(125.0)));
    CHECK(!c.berry_esseen_ok);
    CHECK(c.berry_esseen_x_ok);
    CHECK(c.normal_ok);
    CHECK(c.normal_term < 1e-100);
  }

  TEST_CASE("normal cdf") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_cdf(-3.0) == doctest::Approx(0.0013498980316301).epsilon(1e-10));
  }

  TEST_CASE("auxiliary penalty") {
    const Matrix A = scalar_matrix(1.0), C = scalar_matrix(5.0);
    CHECK(aux_penalty(5, 2, A, C, 0.0, 3, 3, 8) == 0.0);
    CHECK(aux_penalty(1, 2, A, C, 0.0, 4, 3, 8) == 0.0);
    CHECK(aux_penalty(5, 2, A, C, 0.0, 4, 3, 8) == doctest::Approx(running_cost(8, A, C)));
    // sum_{l >= 1} 5 (1 + l)^2 0.5^l = 55
    CHECK(aux_penalty(1, 0, A, C, 0.5, 4, 3, 8) == doctest::Approx(55.0).epsilon(1e-12));
    double partial = 0.0;
    for (int l = 1; l < 200; ++l) partial += 5.0 * (1 + l) * (1 + l) * std::pow(0.5, l);
    CHECK(partial == doctest::Approx(55.0).epsilon(1e-12));
    CHECK_THROWS_AS(aux_penalty(1, 0, scalar_matrix(3.0), C, 0.5, 4, 3, 8), Error);
  }

  TEST_CASE("erasure-free penalty dominates the running cost below the cap") {
    for (double a : {0.5, 1.0, 1.15}) {
      const Matrix A = scalar_matrix(a), C = scalar_matrix(5.0);
      for (int tau = 2; tau <= 8; ++tau) CHECK(aux_penalty(tau, 2, A, C, 0.0, 5, 3, 8) >= running_cost(tau, A, C));
    }
  }

  TEST_CASE("bound report") {
    const auto config = reference_scenario(100, 0.25, 0.2, 5000);
    const auto pop = assign_types(100, config.types);
    const auto policy = bisection_lambda(pop, config.types, 0.2, 25, 1e-6);
    const auto r = make_bound_report(config, policy, 0.05);
    CHECK(r.kl_exponent > 0.0);
    CHECK(r.gap_bound >= 0.0);
    CHECK(r.p0_cap == p0_aoi_cap(*std::max_element(policy.kappa_high.begin(), policy.kappa_high.end()), 0.25));
    CHECK(r.tail_applicable);
    const auto j = to_json(r);
    CHECK(j.contains("size_conditions"));
    CHECK(j["aux_penalty"].size() == 3);

    // alpha equal to q flags the bound as vacuous
    RelaxedPolicy same = policy;
    same.q = 0.25;
    const auto v = make_bound_report(config, same, 0.05);
    CHECK(v.gap_bound_vacuous);
    CHECK(v.gap_bound == v.U);
  }
}
