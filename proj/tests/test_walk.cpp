#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "bpre/walk.hpp"
#include "support/oracles.hpp"

using namespace bpre;

namespace {

EnvPath manual_env(std::initializer_list<std::array<double, 2>> xs) {
  EnvPath env;
  for (const auto& x : xs) {
    EnvStep s;
    s.x = x;
    s.p = {success_prob_from_log_mean(x[0]), success_prob_from_log_mean(x[1])};
    env.steps.push_back(s);
  }
  return env;
}

}  // namespace

TEST_CASE("cone geometry closed forms") {
  SECTION("rho = 0") {
    const auto g = cone_geometry(0.0);
    REQUIRE(g.phi == std::acos(0.0));
    REQUIRE(g.p == 2.0);
    REQUIRE(g.theta == 1.0);
    REQUIRE(g.t == std::array<double, 4>{1.0, 0.0, 0.0, 1.0});
  }
  SECTION("rho = 0.6") {
    const auto g = cone_geometry(0.6);
    REQUIRE(std::fabs(g.t[0] - 1.25) < 1e-15);
    REQUIRE(std::fabs(g.t[1] + 0.75) < 1e-15);
    REQUIRE(g.t[2] == 0.0);
    REQUIRE(g.t[3] == 1.0);
  }
  SECTION("rho = -0.5") {
    const auto g = cone_geometry(-0.5);
    REQUIRE(std::fabs(g.phi - std::numbers::pi / 3.0) < 1e-15);
    REQUIRE(std::fabs(g.p - 3.0) < 1e-14);
    REQUIRE(std::fabs(g.theta - 1.5) < 1e-14);
  }
  SECTION("boundary rejected") {
    REQUIRE_THROWS_AS(cone_geometry(1.0), std::domain_error);
    REQUIRE_THROWS_AS(cone_geometry(-1.0), std::domain_error);
    REQUIRE_THROWS_MATCHES(cone_geometry(1.0), std::domain_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("rho")));
  }
}

TEST_CASE("transform properties across rho") {
  for (double rho : {-0.9, -0.5, -0.1, 0.0, 0.3, 0.6, 0.9}) {
    const auto g = cone_geometry(rho);
    SECTION("T T_inv = identity, rho = " + std::to_string(rho)) {
      const std::array<double, 4> prod{
          g.t[0] * g.t_inv[0] + g.t[1] * g.t_inv[2],
          g.t[0] * g.t_inv[1] + g.t[1] * g.t_inv[3],
          g.t[2] * g.t_inv[0] + g.t[3] * g.t_inv[2],
          g.t[2] * g.t_inv[1] + g.t[3] * g.t_inv[3]};
      REQUIRE(std::fabs(prod[0] - 1.0) <= 1e-12);
      REQUIRE(std::fabs(prod[1]) <= 1e-12);
      REQUIRE(std::fabs(prod[2]) <= 1e-12);
      REQUIRE(std::fabs(prod[3] - 1.0) <= 1e-12);
    }
    SECTION("axis images open by arccos(-rho), rho = " + std::to_string(rho)) {
      const Vec2 e1 = g.apply({1.0, 0.0});
      const Vec2 e2 = g.apply({0.0, 1.0});
      const double cosang =
          (e1.x1 * e2.x1 + e1.x2 * e2.x2) / (e1.norm() * e2.norm());
      REQUIRE(std::fabs(std::acos(cosang) - std::acos(-rho)) <= 1e-12);
      REQUIRE(std::fabs(e1.x2) <= 1e-15);  // first axis maps onto the horizontal
      REQUIRE(e1.x1 > 0.0);
    }
    SECTION("whitening: empirical covariance of T X, rho = " + std::to_string(rho)) {
      EnvStepSampler sampler(make_gaussian_env(rho), 1001);
      double s11 = 0, s22 = 0, s12 = 0, q11 = 0, q22 = 0, q12 = 0;
      const std::size_t n = 1000000;
      for (std::size_t i = 0; i < n; ++i) {
        const auto x = sampler.next_x();
        const Vec2 y = g.apply({x[0], x[1]});
        s11 += y.x1 * y.x1;
        s22 += y.x2 * y.x2;
        s12 += y.x1 * y.x2;
        q11 += y.x1 * y.x1 * y.x1 * y.x1;
        q22 += y.x2 * y.x2 * y.x2 * y.x2;
        q12 += y.x1 * y.x2 * y.x1 * y.x2;
      }
      const double nd = static_cast<double>(n);
      auto se = [&](double s, double q) {
        const double m = s / nd;
        return std::sqrt(std::fmax(0.0, q / nd - m * m) / nd);
      };
      REQUIRE(std::fabs(s11 / nd - 1.0) <= 4.0 * se(s11, q11));
      REQUIRE(std::fabs(s22 / nd - 1.0) <= 4.0 * se(s22, q22));
      REQUIRE(std::fabs(s12 / nd) <= 4.0 * se(s12, q12));
    }
  }
}

TEST_CASE("walk paths are prefix sums") {
  SECTION("empty environment") {
    const auto w = walk_from_env(EnvPath{});
    REQUIRE(w.s.size() == 1);
    REQUIRE(w.s[0].x1 == 0.0);
    REQUIRE(w.s[0].x2 == 0.0);
  }
  SECTION("two fixed steps") {
    const auto w = walk_from_env(manual_env({{1.0, -1.0}, {1.0, -1.0}}));
    REQUIRE(w.s[2].x1 == 2.0);
    REQUIRE(w.s[2].x2 == -2.0);
  }
  SECTION("recomputation oracle") {
    const auto env = sample_env_path(make_gaussian_env(0.4), 300, 333);
    const auto w = walk_from_env(env);
    double s1 = 0, s2 = 0;
    for (std::size_t k = 0; k < env.steps.size(); ++k) {
      s1 += env.steps[k].x[0];
      s2 += env.steps[k].x[1];
      REQUIRE(w.s[k + 1].x1 == s1);
      REQUIRE(w.s[k + 1].x2 == s2);
    }
  }
}

TEST_CASE("exit_time matches definition and oracle") {
  SECTION("immediate exit") {
    const auto w = walk_from_env(manual_env({{-1.0, 0.5}}));
    const auto rec = exit_time({0.5, 0.5}, w);
    REQUIRE(rec.tau.has_value());
    REQUIRE(*rec.tau == 1);
  }
  SECTION("unreachable boundary is censored") {
    const auto env = sample_env_path(make_discrete_env(0.0), 10, 4);
    const auto rec = exit_time({1e6, 1e6}, walk_from_env(env));
    REQUIRE(rec.censored());
  }
  SECTION("boundary start rejected") {
    const auto w = walk_from_env(manual_env({{1.0, 1.0}}));
    REQUIRE_THROWS_AS(exit_time({0.0, 1.0}, w), std::invalid_argument);
    REQUIRE_THROWS_AS(exit_time({1.0, -0.1}, w), std::invalid_argument);
  }
  SECTION("naive scan oracle on random paths") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto env = sample_env_path(make_gaussian_env(-0.3), 64, 1000 + seed);
      const auto w = walk_from_env(env);
      const auto rec = exit_time({1.5, 0.5}, w);
      REQUIRE(rec.tau == oracles::naive_exit_scan({1.5, 0.5}, w));
    }
  }
}

TEST_CASE("harmonic surrogate u") {
  SECTION("rho=0 closed form 2 x1 x2") {
    const auto g = cone_geometry(0.0);
    REQUIRE(u_harmonic(g, {1.0, 1.0}) == 2.0);
    REQUIRE(u_harmonic(g, {1.0, 0.0}) == 0.0);
    Rng rng(5);
    std::uniform_real_distribution<double> uni(0.01, 5.0);
    for (int i = 0; i < 100; ++i) {
      const double a = uni(rng), b = uni(rng);
      REQUIRE(std::fabs(u_harmonic(g, {a, b}) - 2.0 * a * b) <= 1e-12 * (2.0 * a * b));
    }
  }
  SECTION("positive inside, zero on the axes") {
    for (double rho : {-0.7, -0.2, 0.3, 0.8}) {
      const auto g = cone_geometry(rho);
      Rng rng(6);
      std::uniform_real_distribution<double> uni(0.05, 4.0);
      for (int i = 0; i < 200; ++i) {
        const double a = uni(rng), b = uni(rng);
        REQUIRE(u_harmonic(g, {a, b}) > 0.0);
      }
      REQUIRE(std::fabs(u_harmonic(g, {2.0, 0.0})) <= 1e-12);
      REQUIRE(std::fabs(u_harmonic(g, {0.0, 2.0})) <= 1e-9);
      REQUIRE(u_harmonic(g, {1.0, -0.5}) <= 0.0);  // negative angle
    }
  }
  SECTION("covariance-weighted Laplacian vanishes, rho = -0.5") {
    const auto g = cone_geometry(-0.5);
    Rng rng(7);
    std::uniform_real_distribution<double> uni(0.2, 1.5);
    for (int i = 0; i < 50; ++i) {
      const Vec2 x{uni(rng), uni(rng)};
      const double r = g.apply(x).norm();
      const double lap = oracles::sigma_laplacian_fd(g, x, 1e-4);
      REQUIRE(std::fabs(lap) <= 1e-6 * std::pow(r, g.p - 2.0));
    }
  }
}

TEST_CASE("exit tail curve") {
  SECTION("one-step value matches enumeration, discrete rho=0") {
    const auto spec = make_discrete_env(0.0);
    const auto curve = exit_tail_curve(spec, {0.5, 0.5}, {1}, 200000, 21);
    REQUIRE(std::fabs(curve.rows[0].estimate - 0.25) <= 3.0 * curve.rows[0].stderr_);
  }
  SECTION("one-step value matches normal orthant, gaussian rho=0") {
    const auto spec = make_gaussian_env(0.0);
    const auto curve = exit_tail_curve(spec, {0.5, 0.5}, {1}, 200000, 22);
    const double exact = oracles::normal_cdf(0.5) * oracles::normal_cdf(0.5);
    REQUIRE(std::fabs(curve.rows[0].estimate - exact) <= 3.0 * curve.rows[0].stderr_);
  }
  SECTION("monotone in n on every run") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto curve = exit_tail_curve(make_gaussian_env(0.2), {1.0, 1.0},
                                         {1, 2, 4, 8, 16, 32}, 5000, seed);
      for (std::size_t i = 1; i < curve.rows.size(); ++i)
        REQUIRE(curve.rows[i].estimate <= curve.rows[i - 1].estimate);
    }
  }
  SECTION("replica warning and preconditions") {
    const auto spec = make_gaussian_env(0.0);
    REQUIRE(exit_tail_curve(spec, {1, 1}, {4}, 500, 1).low_replica_warning);
    REQUIRE_FALSE(exit_tail_curve(spec, {1, 1}, {4}, 2000, 1).low_replica_warning);
    REQUIRE_THROWS_AS(exit_tail_curve(spec, {0.0, 1.0}, {4}, 100, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(exit_tail_curve(spec, {1.0, 1.0}, {4, 4}, 100, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(exit_tail_curve(make_gaussian_env(-1.0), {1, 1}, {4}, 100, 1),
                      std::invalid_argument);
  }
  SECTION("worker count never changes the numbers") {
    const auto spec = make_gaussian_env(-0.4);
    const auto a = exit_tail_curve(spec, {1, 1}, {2, 8, 32}, 6000, 9, 1);
    const auto b = exit_tail_curve(spec, {1, 1}, {2, 8, 32}, 6000, 9, 4);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      REQUIRE(a.rows[i].estimate == b.rows[i].estimate);
      REQUIRE(a.rows[i].stderr_ == b.rows[i].stderr_);
    }
  }
}
