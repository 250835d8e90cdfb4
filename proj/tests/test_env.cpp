#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "bpre/env.hpp"
#include "support/oracles.hpp"

using namespace bpre;

TEST_CASE("log-mean and success probability invert each other") {
  Rng rng(12345);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    // p spread over (1e-9, 1-1e-9) with log-uniform tails
    const double e = -9.0 * uni(rng);
    double p = std::pow(10.0, e);
    if (i % 2 == 1) p = 1.0 - p;
    const double back = success_prob_from_log_mean(log_mean_from_success_prob(p));
    REQUIRE(std::fabs(back - p) <= 1e-12 * p);
  }
  REQUIRE_THROWS_AS(log_mean_from_success_prob(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(log_mean_from_success_prob(1.0), std::invalid_argument);
}

TEST_CASE("sampled steps keep x and p consistent") {
  for (auto family : {EnvFamily::GaussianSigmoid, EnvFamily::DiscreteFourPoint}) {
    const EnvModelSpec spec{family, 0.3};
    const auto path = sample_env_path(spec, 2000, 99);
    for (const auto& step : path.steps)
      for (int i = 0; i < 2; ++i) {
        const double x_back = log_mean_from_success_prob(step.p[i]);
        REQUIRE(std::fabs(x_back - step.x[i]) <=
                1e-12 * std::fmax(1.0, std::fabs(step.x[i])));
      }
  }
}

TEST_CASE("discrete family has the stated atoms and exact moments") {
  // closed-form check of the four-term sums for several rho
  for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9, 1.0}) {
    const double pa = 0.25 * (1.0 + rho), pb = 0.25 * (1.0 - rho);
    const double mean = pa * 1 + pa * (-1) + pb * 1 + pb * (-1);
    const double second = pa + pa + pb + pb;
    const double cross = pa * 1 + pa * 1 + pb * (-1) + pb * (-1);
    REQUIRE(mean == 0.0);
    REQUIRE(second == 1.0);
    REQUIRE(std::fabs(cross - rho) <= 1e-15);
  }

  SECTION("rho=0 atom frequencies within 3 sigma of 1/4") {
    const auto spec = make_discrete_env(0.0);
    EnvStepSampler sampler(spec, 2024);
    const std::size_t n = 1000000;
    std::array<std::size_t, 4> counts{};
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = sampler.next_x();
      const int atom = x[0] > 0 ? (x[1] > 0 ? 0 : 2) : (x[1] > 0 ? 3 : 1);
      ++counts[atom];
    }
    const double se = std::sqrt(0.25 * 0.75 / static_cast<double>(n));
    for (auto c : counts)
      REQUIRE(std::fabs(static_cast<double>(c) / n - 0.25) <= 3.0 * se);
  }

  SECTION("rho=1 only produces the synchronized atoms") {
    const auto spec = make_discrete_env(1.0);
    EnvStepSampler sampler(spec, 7);
    std::size_t up = 0;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = sampler.next_x();
      REQUIRE(x[0] == x[1]);
      if (x[0] > 0) ++up;
    }
    const double se = std::sqrt(0.25 / static_cast<double>(n));
    REQUIRE(std::fabs(static_cast<double>(up) / n - 0.5) <= 3.0 * se);
  }
}

TEST_CASE("gaussian family correlation and degenerate cases") {
  SECTION("rho=1 duplicates the coordinate exactly") {
    EnvStepSampler sampler(make_gaussian_env(1.0), 5);
    for (int i = 0; i < 1000; ++i) {
      const auto x = sampler.next_x();
      REQUIRE(x[0] == x[1]);
    }
  }
  SECTION("rho=0.5 empirical correlation within 0.01 over 1e6 draws") {
    EnvStepSampler sampler(make_gaussian_env(0.5), 11);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = sampler.next_x();
      sx += x[0];
      sy += x[1];
      sxx += x[0] * x[0];
      syy += x[1] * x[1];
      sxy += x[0] * x[1];
    }
    const double nd = static_cast<double>(n);
    const double corr = (sxy / nd - sx / nd * sy / nd) /
                        std::sqrt((sxx / nd - sx / nd * sx / nd) *
                                  (syy / nd - sy / nd * sy / nd));
    REQUIRE(std::fabs(corr - 0.5) <= 0.01);
  }
}

TEST_CASE("env path sampling preconditions and determinism") {
  const auto spec = make_gaussian_env(0.25);
  REQUIRE_THROWS_AS(sample_env_path(spec, 0, 1), std::invalid_argument);

  const auto a = sample_env_path(spec, 500, 77);
  const auto b = sample_env_path(spec, 500, 77);
  REQUIRE(a.steps.size() == 500);
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    REQUIRE(a.steps[k].x == b.steps[k].x);  // bit-identical
    REQUIRE(a.steps[k].p == b.steps[k].p);
  }
  const auto c = sample_env_path(spec, 500, 78);
  REQUIRE(a.steps[0].x != c.steps[0].x);
}

TEST_CASE("moment report flags nothing for healthy parameters") {
  // moment contract across both families and a rho grid
  for (auto family : {EnvFamily::GaussianSigmoid, EnvFamily::DiscreteFourPoint}) {
    for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
      const EnvModelSpec spec{family, rho};
      const auto report = env_moment_report(spec, 1000000, 31);
      INFO("family " << family_name(family) << " rho " << rho);
      CHECK_FALSE(report.flagged());
      CHECK(std::fabs(report.cross - rho) <= 4.0 * report.cross_se + 1e-12);
    }
  }

  SECTION("discrete rho=-0.5 correlation inside +-0.004") {
    const auto report = env_moment_report(make_discrete_env(-0.5), 1000000, 13);
    REQUIRE(std::fabs(report.cross + 0.5) <= 0.004);
  }
  SECTION("gaussian rho=0 mean below 4/sqrt(n)") {
    const auto report = env_moment_report(make_gaussian_env(0.0), 1000000, 17);
    REQUIRE(std::fabs(report.mean[0]) < 4.0 / std::sqrt(1e6));
    REQUIRE(std::fabs(report.mean[1]) < 4.0 / std::sqrt(1e6));
  }
  SECTION("gaussian rho=1 empirical correlation is exactly 1") {
    const auto report = env_moment_report(make_gaussian_env(1.0), 10000, 19);
    REQUIRE(report.pearson_corr == 1.0);
  }
  SECTION("preconditions") {
    REQUIRE_THROWS_AS(env_moment_report(make_gaussian_env(0.0), 10, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(make_gaussian_env(1.5), std::invalid_argument);
    REQUIRE_THROWS_AS(make_discrete_env(-1.01), std::invalid_argument);
  }
}
