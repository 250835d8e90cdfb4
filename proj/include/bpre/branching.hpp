#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bpre/env.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rng.hpp"
#include "bpre/walk.hpp"

namespace bpre {

struct PopulationState {
  std::int64_t z1 = 1;
  std::int64_t z2 = 1;
};

inline void validate_population(PopulationState z) {
  if (z.z1 < 0 || z.z2 < 0)
    throw std::invalid_argument("population sizes must be non-negative");
}

// ---------------------------------------------------------------------------
// Exact quenched survival for geometric offspring.
//
// With A_i(n) = sum_{k=1..n} e^{-S_i(k)}, the non-extinction probability of
// coordinate i given the environment is 1 - (A_i/(1+A_i))^{z_i}. The "1+" in
// the denominator is the k = 0 term e^{-S_i(0)} = 1 of the generating
// function identity. A_i spans hundreds of orders of magnitude at n ~ 10^3,
// so the sum is kept in log domain.
// ---------------------------------------------------------------------------

// Streaming log-sum-exp: log_a() = log sum of exp(terms).
class LogSumExp {
 public:
  void add(double term) {
    ++count_;
    if (term <= max_) {
      acc_ += std::exp(term - max_);
    } else {
      acc_ = acc_ * std::exp(max_ - term) + 1.0;
      max_ = term;
    }
  }
  double value() const {
    if (count_ == 0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(acc_);
  }
  std::size_t count() const { return count_; }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double acc_ = 0.0;
  std::size_t count_ = 0;
};

class QuenchedAccumulator {
 public:
  // Appends the terms e^{-s_i} for one more step of the walk.
  void add_step(double s1, double s2) {
    lse_[0].add(-s1);
    lse_[1].add(-s2);
  }
  double log_a(int coord) const { return lse_[check(coord)].value(); }
  std::size_t n() const { return lse_[0].count(); }

 private:
  static int check(int coord) {
    if (coord != 0 && coord != 1) throw std::invalid_argument("coordinate must be 0 or 1");
    return coord;
  }
  std::array<LogSumExp, 2> lse_{};
};

// 1 - (A/(1+A))^z evaluated from log A without leaving the stable range:
// A/(1+A) = 1/(1+e^{-log A}), so the result is -expm1(-z log1p(e^{-log A})).
inline double survival_from_log_a(double log_a, std::int64_t z) {
  if (z < 0) throw std::invalid_argument("population size must be non-negative");
  if (z == 0) return 0.0;
  const double t = std::log1p(std::exp(-log_a));
  return -std::expm1(-static_cast<double>(z) * t);
}

inline double quenched_survival(const QuenchedAccumulator& acc, int coord,
                                std::int64_t z) {
  return survival_from_log_a(acc.log_a(coord), z);
}

// Y(n) = prod_i [1 - (A_i(n)/(1+A_i(n)))^{z_i}] on every grid point, one
// prefix pass over the walk.
inline std::vector<double> coexistence_functional(const WalkPath& walk,
                                                  PopulationState z,
                                                  const std::vector<std::size_t>& n_grid) {
  validate_population(z);
  validate_n_grid(n_grid);
  if (n_grid.back() > walk.horizon())
    throw std::invalid_argument("n grid exceeds walk horizon");
  QuenchedAccumulator acc;
  std::vector<double> values(n_grid.size());
  std::size_t gi = 0;
  for (std::size_t k = 1; k <= n_grid.back(); ++k) {
    acc.add_step(walk.s[k].x1, walk.s[k].x2);
    if (k == n_grid[gi]) {
      values[gi] = quenched_survival(acc, 0, z.z1) * quenched_survival(acc, 1, z.z2);
      ++gi;
    }
  }
  return values;
}

// ---------------------------------------------------------------------------
// Forward simulation with geometric offspring
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kPopulationCap = std::numeric_limits<std::int64_t>::max();

namespace detail {
// Poisson means beyond this cannot be sampled reliably into int64; the
// trajectory is clamped to the cap and flagged.
inline constexpr double kMaxPoissonMean = 4.0e18;

inline std::int64_t geometric_draw(double p, Rng& rng) {
  // inverse CDF on N_0 (failures before first success), computed in double
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u = 1.0 - uni(rng);  // (0, 1]
  const double g = std::floor(std::log(u) / std::log1p(-p));
  if (g >= 9.0e18) return kPopulationCap;
  return static_cast<std::int64_t>(g);
}
}  // namespace detail

// Total offspring of z individuals with Geometric(p) law on N_0; the sum is a
// negative binomial. Direct summation for small z, exact gamma-Poisson
// mixture above. Returns kPopulationCap on overflow (caller flags it).
inline std::int64_t sample_offspring_total(std::int64_t z, double p, Rng& rng) {
  if (z < 0) throw std::invalid_argument("population size must be non-negative");
  if (p <= 0.0) throw std::domain_error("geometric success parameter must be positive");
  if (p > 1.0) throw std::domain_error("geometric success parameter must be <= 1");
  if (z == 0 || p == 1.0) return 0;
  if (z <= 64) {
    std::int64_t total = 0;
    for (std::int64_t j = 0; j < z; ++j) {
      const std::int64_t g = detail::geometric_draw(p, rng);
      if (g >= kPopulationCap - total) return kPopulationCap;
      total += g;
    }
    return total;
  }
  std::gamma_distribution<double> gamma(static_cast<double>(z), (1.0 - p) / p);
  const double lambda = gamma(rng);
  if (lambda >= detail::kMaxPoissonMean) return kPopulationCap;
  std::poisson_distribution<std::int64_t> poisson(lambda);
  return poisson(rng);
}

struct PopulationTrajectory {
  std::vector<std::array<std::int64_t, 2>> z;  // z[0] is the start state
  bool saturated = false;
};

// Coordinates evolve independently given the environment; extinction is
// absorbing per coordinate; counts saturate at 2^63-1 with an explicit flag.
inline PopulationTrajectory simulate_forward(PopulationState z0, const EnvPath& env,
                                             Rng& rng) {
  validate_population(z0);
  PopulationTrajectory traj;
  traj.z.resize(env.steps.size() + 1);
  traj.z[0] = {z0.z1, z0.z2};
  std::array<std::int64_t, 2> cur = traj.z[0];
  for (std::size_t k = 0; k < env.steps.size(); ++k) {
    for (int i = 0; i < 2; ++i) {
      if (cur[i] == 0) continue;
      if (cur[i] == kPopulationCap) {  // saturated stays saturated
        traj.saturated = true;
        continue;
      }
      cur[i] = sample_offspring_total(cur[i], env.steps[k].p[i], rng);
      if (cur[i] == kPopulationCap) traj.saturated = true;
    }
    traj.z[k + 1] = cur;
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Annealed survival curves
// ---------------------------------------------------------------------------

enum class CurveMode { Coexist, Single1, Single2 };

inline const char* curve_mode_name(CurveMode m) {
  switch (m) {
    case CurveMode::Coexist: return "coexist";
    case CurveMode::Single1: return "single1";
    default: return "single2";
  }
}

inline CurveMode curve_mode_from_name(const std::string& s) {
  if (s == "coexist") return CurveMode::Coexist;
  if (s == "single1") return CurveMode::Single1;
  if (s == "single2") return CurveMode::Single2;
  throw std::invalid_argument("unknown curve mode: " + s);
}

// Mean of the exact quenched functional over independent environments, every
// grid point from one prefix pass per replica. Sample standard errors.
inline SurvivalCurve annealed_curve(const EnvModelSpec& spec, PopulationState z,
                                    const std::vector<std::size_t>& n_grid,
                                    std::size_t replicas, std::uint64_t seed,
                                    CurveMode mode = CurveMode::Coexist,
                                    unsigned threads = 0) {
  validate_population(z);
  validate_n_grid(n_grid);
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (spec.rho == -1.0)
    throw std::invalid_argument("annealed estimation rejects the asynchronous boundary rho = -1");

  const std::size_t max_n = n_grid.back();
  const std::size_t g = n_grid.size();
  const std::uint64_t tag = fnv1a64("annealed_curve");
  const std::size_t n_chunks = chunk_count(replicas);
  struct Partial {
    std::vector<double> sum, sumsq;
  };
  std::vector<Partial> parts(n_chunks);

  for_each_chunk(replicas, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    auto& part = parts[c];
    part.sum.assign(g, 0.0);
    part.sumsq.assign(g, 0.0);
    for (std::size_t r = begin; r < end; ++r) {
      EnvStepSampler sampler(spec, derive_stream(seed, tag, r));
      double s1 = 0.0, s2 = 0.0;
      LogSumExp lse1, lse2;
      std::size_t gi = 0;
      for (std::size_t k = 1; k <= max_n; ++k) {
        const auto step = sampler.next_x();
        s1 += step[0];
        s2 += step[1];
        lse1.add(-s1);
        lse2.add(-s2);
        if (k == n_grid[gi]) {
          double y;
          switch (mode) {
            case CurveMode::Coexist:
              y = survival_from_log_a(lse1.value(), z.z1) *
                  survival_from_log_a(lse2.value(), z.z2);
              break;
            case CurveMode::Single1:
              y = survival_from_log_a(lse1.value(), z.z1);
              break;
            default:
              y = survival_from_log_a(lse2.value(), z.z2);
              break;
          }
          part.sum[gi] += y;
          part.sumsq[gi] += y * y;
          ++gi;
        }
      }
    }
  });

  SurvivalCurve curve;
  curve.rho = spec.rho;
  curve.family = spec.family;
  curve.z1 = static_cast<double>(z.z1);
  curve.z2 = static_cast<double>(z.z2);
  curve.replicas = replicas;
  curve.seed = seed;
  curve.low_replica_warning = replicas < 1000;
  curve.rows.resize(g);
  const double n = static_cast<double>(replicas);
  for (std::size_t i = 0; i < g; ++i) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
      sum += parts[c].sum[i];
      sumsq += parts[c].sumsq[i];
    }
    const double mean = sum / n;
    const double var = replicas > 1 ? std::fmax(0.0, (sumsq - sum * sum / n) / (n - 1.0)) : 0.0;
    curve.rows[i] = {n_grid[i], mean, std::sqrt(var / n)};
  }
  return curve;
}

}  // namespace bpre
