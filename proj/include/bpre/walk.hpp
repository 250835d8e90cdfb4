#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bpre/env.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rng.hpp"

namespace bpre {

struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;
  double min() const { return x1 < x2 ? x1 : x2; }
  double norm() const { return std::hypot(x1, x2); }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a.x1, c * a.x2}; }
inline bool strictly_inside_quadrant(Vec2 v) { return v.x1 > 0.0 && v.x2 > 0.0; }

// ---------------------------------------------------------------------------
// Cone geometry of the transformed quadrant.
//
// T maps the log-mean pair to uncorrelated unit-variance coordinates; the
// image of the positive quadrant is a convex cone of opening arccos(-rho).
// The tail exponent of the exit time is p/2 with p = pi / arccos(-rho), and
// the co-existence exponent is theta = p/2.
// ---------------------------------------------------------------------------

struct ConeGeometry {
  double rho = 0.0;
  double phi = 0.0;    // opening angle arccos(-rho)
  double p = 0.0;      // pi / phi
  double theta = 0.0;  // p / 2
  std::array<double, 4> t{};      // row-major 2x2
  std::array<double, 4> t_inv{};  // row-major 2x2

  Vec2 apply(Vec2 v) const {
    return {t[0] * v.x1 + t[1] * v.x2, t[2] * v.x1 + t[3] * v.x2};
  }
  Vec2 apply_inverse(Vec2 v) const {
    return {t_inv[0] * v.x1 + t_inv[1] * v.x2, t_inv[2] * v.x1 + t_inv[3] * v.x2};
  }
};

inline ConeGeometry cone_geometry(double rho) {
  if (!(std::fabs(rho) < 1.0))
    throw std::domain_error(
        "cone geometry requires |rho| < 1: the boundary cases rho = +1 (fully "
        "synchronous environment) and rho = -1 (asynchronous environment) have "
        "a degenerate quadrant image");
  ConeGeometry g;
  g.rho = rho;
  g.phi = std::acos(-rho);
  g.p = std::numbers::pi / g.phi;
  g.theta = 0.5 * g.p;
  const double s = std::sqrt(1.0 - rho * rho);
  g.t = {1.0 / s, -rho / s, 0.0, 1.0};
  g.t_inv = {s, rho, 0.0, 1.0};
  return g;
}

// Positive harmonic function of the transformed cone: with (r, alpha) the
// polar coordinates of T x measured from the image of the first axis (which
// T sends to the positive horizontal axis), u = r^p sin(p alpha). Vanishes on
// the cone boundary, positive strictly inside, non-positive at negative
// angles.
inline double u_harmonic(const ConeGeometry& geom, Vec2 x) {
  const Vec2 y = geom.apply(x);
  if (geom.p == 2.0) return 2.0 * y.x1 * y.x2;  // rho = 0: u = 2 y1 y2 exactly
  const double r = std::hypot(y.x1, y.x2);
  if (r == 0.0) return 0.0;
  const double alpha = std::atan2(y.x2, y.x1);
  return std::pow(r, geom.p) * std::sin(geom.p * alpha);
}

// ---------------------------------------------------------------------------
// Walk paths and exit times
// ---------------------------------------------------------------------------

struct WalkPath {
  std::vector<Vec2> s;  // prefix sums, s[0] = (0, 0)
  std::uint64_t stream = 0;
  std::size_t horizon() const { return s.empty() ? 0 : s.size() - 1; }
};

inline WalkPath walk_from_env(const EnvPath& env) {
  WalkPath w;
  w.stream = env.stream;
  w.s.resize(env.steps.size() + 1);
  w.s[0] = {0.0, 0.0};
  for (std::size_t k = 0; k < env.steps.size(); ++k)
    w.s[k + 1] = w.s[k] + Vec2{env.steps[k].x[0], env.steps[k].x[1]};
  return w;
}

struct ExitRecord {
  std::optional<std::size_t> tau;  // empty = censored at the path horizon
  Vec2 start;
  std::size_t horizon = 0;
  bool censored() const { return !tau.has_value(); }
};

// First k >= 1 with min(x + S(k)) <= 0 (open quadrant), censored at the end
// of the path otherwise.
inline ExitRecord exit_time(Vec2 x, const WalkPath& walk) {
  if (!strictly_inside_quadrant(x))
    throw std::invalid_argument("exit_time start must lie strictly inside the quadrant");
  ExitRecord rec;
  rec.start = x;
  rec.horizon = walk.horizon();
  for (std::size_t k = 1; k < walk.s.size(); ++k) {
    const Vec2 pos = x + walk.s[k];
    if (pos.min() <= 0.0) {
      rec.tau = k;
      return rec;
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Survival curves (shared by exit-tail and co-existence estimators)
// ---------------------------------------------------------------------------

struct SurvivalPoint {
  std::size_t n = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
};

struct SurvivalCurve {
  std::vector<SurvivalPoint> rows;
  double rho = 0.0;
  EnvFamily family = EnvFamily::GaussianSigmoid;
  double z1 = 0.0, z2 = 0.0;  // start data: population sizes or walk start
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  bool low_replica_warning = false;
};

inline void validate_n_grid(const std::vector<std::size_t>& n_grid) {
  if (n_grid.empty()) throw std::invalid_argument("n grid must be non-empty");
  if (n_grid.front() < 1) throw std::invalid_argument("n grid values must be >= 1");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1])
      throw std::invalid_argument("n grid must be strictly increasing");
}

// Monte Carlo estimate of P(tau_x > n) on the whole grid in a single pass per
// replica (exit beyond n implies exit beyond every smaller n). Binomial
// standard errors.
inline SurvivalCurve exit_tail_curve(const EnvModelSpec& spec, Vec2 x,
                                     const std::vector<std::size_t>& n_grid,
                                     std::size_t replicas, std::uint64_t seed,
                                     unsigned threads = 0) {
  if (!strictly_inside_quadrant(x))
    throw std::invalid_argument("exit_tail_curve start must lie strictly inside the quadrant");
  if (spec.rho == -1.0)
    throw std::invalid_argument("exit tail estimation rejects the asynchronous boundary rho = -1");
  validate_n_grid(n_grid);
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");

  const std::size_t max_n = n_grid.back();
  const std::size_t g = n_grid.size();
  const std::uint64_t tag = fnv1a64("exit_tail_curve");
  const std::size_t n_chunks = chunk_count(replicas);
  std::vector<std::vector<double>> chunk_sums(n_chunks, std::vector<double>(g, 0.0));

  for_each_chunk(replicas, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    auto& sums = chunk_sums[c];
    for (std::size_t r = begin; r < end; ++r) {
      EnvStepSampler sampler(spec, derive_stream(seed, tag, r));
      double s1 = x.x1, s2 = x.x2;
      std::size_t tau = 0;  // 0 = survived to max_n
      for (std::size_t k = 1; k <= max_n; ++k) {
        const auto step = sampler.next_x();
        s1 += step[0];
        s2 += step[1];
        if (s1 <= 0.0 || s2 <= 0.0) {
          tau = k;
          break;
        }
      }
      for (std::size_t i = 0; i < g; ++i)
        if (tau == 0 || tau > n_grid[i]) sums[i] += 1.0;
    }
  });

  SurvivalCurve curve;
  curve.rho = spec.rho;
  curve.family = spec.family;
  curve.z1 = x.x1;
  curve.z2 = x.x2;
  curve.replicas = replicas;
  curve.seed = seed;
  curve.low_replica_warning = replicas < 1000;
  curve.rows.resize(g);
  const double n = static_cast<double>(replicas);
  for (std::size_t i = 0; i < g; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) total += chunk_sums[c][i];
    const double phat = total / n;
    curve.rows[i] = {n_grid[i], phat, std::sqrt(phat * (1.0 - phat) / n)};
  }
  return curve;
}

}  // namespace bpre
