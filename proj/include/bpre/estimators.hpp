#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bpre/branching.hpp"
#include "bpre/env.hpp"
#include "bpre/harmonic.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rng.hpp"
#include "bpre/walk.hpp"

namespace bpre {

// Co-existence exponent theta(rho) = pi / (2 arccos(-rho)), in (1/2, inf) for
// |rho| < 1; equals p/2 of the cone geometry.
inline double theta_formula(double rho) {
  if (!(std::fabs(rho) < 1.0))
    throw std::domain_error(
        "theta(rho) requires |rho| < 1; rho = 1 decays like n^{-1/2} and "
        "rho = -1 decays faster than any power");
  return std::numbers::pi / (2.0 * std::acos(-rho));
}

// ---------------------------------------------------------------------------
// Power-law exponent fit
// ---------------------------------------------------------------------------

struct ExponentFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 95%
  double intercept = 0.0;           // log-amplitude
  std::size_t n_min = 0;
  std::size_t points_used = 0;
  bool excluded_zero_estimates = false;
};

// Weighted least squares of log(estimate) on log(n) over rows with n >= n_min
// and estimate > 0. Weights are inverse squared relative standard errors
// (the delta-method variance of the log); slope variance comes from the same
// weights, so exact input data yields a zero standard error.
inline ExponentFit fit_power_law(const SurvivalCurve& curve, std::size_t n_min) {
  std::vector<double> xs, ys, sigmas;
  bool excluded = false;
  for (const auto& row : curve.rows) {
    if (row.n < n_min) continue;
    if (!(row.estimate > 0.0)) {
      excluded = true;
      continue;
    }
    xs.push_back(std::log(static_cast<double>(row.n)));
    ys.push_back(std::log(row.estimate));
    sigmas.push_back(row.stderr_ / row.estimate);
  }
  const std::size_t m = xs.size();
  if (m < 4)
    throw std::invalid_argument("power-law fit needs at least 4 usable grid points");

  const bool noiseless = std::all_of(sigmas.begin(), sigmas.end(),
                                     [](double s) { return s == 0.0; });
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = noiseless ? 1.0 : std::fmax(sigmas[i], 1e-12);
    w[i] = 1.0 / (s * s);
  }

  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sw += w[i];
    swx += w[i] * xs[i];
    swy += w[i] * ys[i];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = xs[i] - xbar;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * (ys[i] - ybar);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("degenerate grid: all n equal");

  ExponentFit fit;
  fit.n_min = n_min;
  fit.points_used = m;
  fit.excluded_zero_estimates = excluded;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  fit.stderr_ = noiseless ? 0.0 : std::sqrt(1.0 / sxx);
  fit.ci_lo = fit.slope - 1.96 * fit.stderr_;
  fit.ci_hi = fit.slope + 1.96 * fit.stderr_;
  return fit;
}

// ---------------------------------------------------------------------------
// Exact enumeration oracles (DiscreteFourPoint family, n <= 8)
// ---------------------------------------------------------------------------

enum class EnumOrder { Lexicographic, DepthFirst };

namespace detail {

struct DiscreteAtoms {
  std::array<std::array<double, 2>, 4> step;
  std::array<double, 4> prob;
};

inline DiscreteAtoms discrete_atoms(const EnvModelSpec& spec, std::size_t n,
                                    const char* what) {
  if (spec.family != EnvFamily::DiscreteFourPoint)
    throw std::invalid_argument(std::string(what) +
                                " requires the DiscreteFourPoint family");
  if (n < 1 || n > 8)
    throw std::invalid_argument(std::string(what) + " enumerates only n in [1, 8]");
  const double pa = 0.25 * (1.0 + spec.rho);
  const double pb = 0.25 * (1.0 - spec.rho);
  return {{{{1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}}}, {pa, pa, pb, pb}};
}

template <typename Leaf>
void enumerate_depth_first(const DiscreteAtoms& atoms, std::size_t n, std::size_t k,
                           double s1, double s2, double a1, double a2, double prob,
                           Leaf&& leaf) {
  if (k == n) {
    leaf(s1, s2, a1, a2, prob);
    return;
  }
  for (int d = 0; d < 4; ++d) {
    if (atoms.prob[d] == 0.0) continue;
    const double ns1 = s1 + atoms.step[d][0];
    const double ns2 = s2 + atoms.step[d][1];
    enumerate_depth_first(atoms, n, k + 1, ns1, ns2, a1 + std::exp(-ns1),
                          a2 + std::exp(-ns2), prob * atoms.prob[d],
                          std::forward<Leaf>(leaf));
  }
}

}  // namespace detail

// Exact P(Z_1(n) > 0, Z_2(n) > 0) as the 4^n-term sum of sequence probability
// times the quenched functional Y(n). The two enumeration orders sum the same
// terms in different orders; agreement is a permutation-invariance check.
inline double brute_force_coexistence(const EnvModelSpec& spec, PopulationState z,
                                      std::size_t n,
                                      EnumOrder order = EnumOrder::Lexicographic) {
  validate_population(z);
  const auto atoms = detail::discrete_atoms(spec, n, "brute_force_coexistence");
  auto y_value = [&](double a1, double a2) {
    const double y1 = z.z1 == 0 ? 0.0
                                : -std::expm1(static_cast<double>(z.z1) *
                                              std::log(a1 / (1.0 + a1)));
    const double y2 = z.z2 == 0 ? 0.0
                                : -std::expm1(static_cast<double>(z.z2) *
                                              std::log(a2 / (1.0 + a2)));
    return y1 * y2;
  };
  double total = 0.0;
  if (order == EnumOrder::Lexicographic) {
    const std::uint64_t count = std::uint64_t{1} << (2 * n);
    for (std::uint64_t code = 0; code < count; ++code) {
      double s1 = 0.0, s2 = 0.0, a1 = 0.0, a2 = 0.0, prob = 1.0;
      std::uint64_t c = code;
      for (std::size_t k = 0; k < n; ++k, c >>= 2) {
        const int d = static_cast<int>(c & 3);
        prob *= atoms.prob[d];
        s1 += atoms.step[d][0];
        s2 += atoms.step[d][1];
        a1 += std::exp(-s1);
        a2 += std::exp(-s2);
      }
      if (prob == 0.0) continue;
      total += prob * y_value(a1, a2);
    }
  } else {
    detail::enumerate_depth_first(atoms, n, 0, 0.0, 0.0, 0.0, 0.0, 1.0,
                                  [&](double, double, double a1, double a2, double prob) {
                                    total += prob * y_value(a1, a2);
                                  });
  }
  return total;
}

// Exact P(tau_x > n) over all 4^n step sequences.
inline double brute_force_exit(const EnvModelSpec& spec, Vec2 x, std::size_t n,
                               EnumOrder order = EnumOrder::Lexicographic) {
  if (!strictly_inside_quadrant(x))
    throw std::invalid_argument("brute_force_exit start must lie strictly inside the quadrant");
  const auto atoms = detail::discrete_atoms(spec, n, "brute_force_exit");
  double total = 0.0;
  if (order == EnumOrder::Lexicographic) {
    const std::uint64_t count = std::uint64_t{1} << (2 * n);
    for (std::uint64_t code = 0; code < count; ++code) {
      double s1 = x.x1, s2 = x.x2, prob = 1.0;
      bool alive = true;
      std::uint64_t c = code;
      for (std::size_t k = 0; k < n; ++k, c >>= 2) {
        const int d = static_cast<int>(c & 3);
        prob *= atoms.prob[d];
        s1 += atoms.step[d][0];
        s2 += atoms.step[d][1];
        if (s1 <= 0.0 || s2 <= 0.0) {
          alive = false;
          break;
        }
      }
      if (alive) total += prob;
    }
  } else {
    // depth-first with pruning of exited branches
    auto recurse = [&](auto&& self, std::size_t k, double s1, double s2,
                       double prob) -> void {
      if (k == n) {
        total += prob;
        return;
      }
      for (int d = 0; d < 4; ++d) {
        if (atoms.prob[d] == 0.0) continue;
        const double ns1 = s1 + atoms.step[d][0];
        const double ns2 = s2 + atoms.step[d][1];
        if (ns1 <= 0.0 || ns2 <= 0.0) continue;
        self(self, k + 1, ns1, ns2, prob * atoms.prob[d]);
      }
    };
    recurse(recurse, 0, x.x1, x.x2, 1.0);
  }
  return total;
}

struct OracleReport {
  double exact = 0.0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double z_score = 0.0;
};

inline OracleReport make_oracle_report(double exact, double estimate, double se) {
  OracleReport r{exact, estimate, se, 0.0};
  r.z_score = se > 0.0 ? (estimate - exact) / se : 0.0;
  return r;
}

inline OracleReport oracle_coexistence(const EnvModelSpec& spec, PopulationState z,
                                       std::size_t n, std::size_t replicas,
                                       std::uint64_t seed, unsigned threads = 0) {
  const double exact = brute_force_coexistence(spec, z, n);
  const auto curve = annealed_curve(spec, z, {n}, replicas, seed, CurveMode::Coexist, threads);
  return make_oracle_report(exact, curve.rows[0].estimate, curve.rows[0].stderr_);
}

inline OracleReport oracle_exit(const EnvModelSpec& spec, Vec2 x, std::size_t n,
                                std::size_t replicas, std::uint64_t seed,
                                unsigned threads = 0) {
  const double exact = brute_force_exit(spec, x, n);
  const auto curve = exit_tail_curve(spec, x, {n}, replicas, seed, threads);
  return make_oracle_report(exact, curve.rows[0].estimate, curve.rows[0].stderr_);
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov distance for weighted samples
// ---------------------------------------------------------------------------

inline double ks_distance(const std::vector<double>& a_values,
                          const std::vector<double>& a_weights,
                          const std::vector<double>& b_values,
                          const std::vector<double>& b_weights) {
  if (a_values.size() != a_weights.size() || b_values.size() != b_weights.size())
    throw std::invalid_argument("values and weights must have equal length");
  if (a_values.empty() || b_values.empty())
    throw std::invalid_argument("ks_distance needs non-empty samples");

  auto sorted = [](const std::vector<double>& v, const std::vector<double>& w) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<std::pair<double, double>> out;
    out.reserve(v.size());
    double total = 0.0;
    for (auto i : idx) total += w[i];
    if (!(total > 0.0)) throw std::invalid_argument("ks_distance weights sum to zero");
    for (auto i : idx) out.emplace_back(v[i], w[i] / total);
    return out;
  };
  const auto a = sorted(a_values, a_weights);
  const auto b = sorted(b_values, b_weights);

  double fa = 0.0, fb = 0.0, d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const double xa = i < a.size() ? a[i].first : std::numeric_limits<double>::infinity();
    const double xb = j < b.size() ? b[j].first : std::numeric_limits<double>::infinity();
    const double x = xa < xb ? xa : xb;
    while (i < a.size() && a[i].first == x) fa += a[i++].second;
    while (j < b.size() && b[j].first == x) fb += b[j++].second;
    d = std::fmax(d, std::fabs(fa - fb));
  }
  return d;
}

inline double ks_distance(const std::vector<double>& a, const std::vector<double>& b) {
  return ks_distance(a, std::vector<double>(a.size(), 1.0), b,
                     std::vector<double>(b.size(), 1.0));
}

// ---------------------------------------------------------------------------
// Meander self-consistency
// ---------------------------------------------------------------------------

struct MarginalSamples {
  double t = 0.0;
  std::vector<double> coord1, coord2, radial;  // scaled by 1/sqrt(horizon)
  std::vector<double> weights;                 // normalized
  double ess = 0.0;
};

// Marginals of (x + S(t n))/sqrt(n) under the walk law conditioned on
// tau_x > n, via the h-transform sampler with ancestry-tracked checkpoints.
inline std::vector<MarginalSamples> conditioned_walk_marginals(
    const HarmonicApprox& approx, const EnvModelSpec& spec, Vec2 x,
    std::size_t horizon, const std::vector<double>& t_grid, std::size_t particles,
    std::uint64_t stream, unsigned threads = 0) {
  if (t_grid.empty()) throw std::invalid_argument("t grid must be non-empty");
  HtransformOptions opts;
  opts.threads = threads;
  for (double t : t_grid) {
    if (!(t > 0.0 && t <= 1.0))
      throw std::invalid_argument("t grid values must lie in (0, 1]");
    std::size_t step = static_cast<std::size_t>(std::llround(t * static_cast<double>(horizon)));
    if (step < 1) step = 1;
    if (step > horizon) step = horizon;
    opts.checkpoint_steps.push_back(step);
  }
  auto ens = htransform_sample(approx, spec, x, horizon, particles, stream, opts);
  const auto cw = ens.conditioned_weights();
  const double scale = 1.0 / std::sqrt(static_cast<double>(horizon));
  const double cess = ens.conditioned_ess();

  std::vector<MarginalSamples> out(t_grid.size());
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    auto& m = out[ti];
    m.t = t_grid[ti];
    m.ess = cess;
    // checkpoints were stored sorted; find the one for this t
    const std::size_t want = opts.checkpoint_steps[ti];
    std::size_t ci = 0;
    while (ens.checkpoint_steps[ci] != want) ++ci;
    const auto& snap = ens.checkpoints[ci];
    m.coord1.reserve(snap.size());
    for (std::size_t j = 0; j < snap.size(); ++j) {
      if (cw[j] <= 0.0) continue;
      m.coord1.push_back(snap[j].x1 * scale);
      m.coord2.push_back(snap[j].x2 * scale);
      m.radial.push_back(snap[j].norm() * scale);
      m.weights.push_back(cw[j]);
    }
  }
  return out;
}

// Branching-side marginals: environments weighted by the exact quenched
// co-existence probability Y(n), statistic S(t n)/sqrt(n). Errors out when
// the importance weights carry fewer than 500 effective samples.
inline std::vector<MarginalSamples> coexistence_weighted_walk_marginals(
    const EnvModelSpec& spec, PopulationState z, std::size_t horizon,
    const std::vector<double>& t_grid, std::size_t replicas, std::uint64_t stream,
    unsigned threads = 0) {
  validate_population(z);
  if (t_grid.empty()) throw std::invalid_argument("t grid must be non-empty");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  std::vector<std::size_t> steps;
  for (double t : t_grid) {
    if (!(t > 0.0 && t <= 1.0))
      throw std::invalid_argument("t grid values must lie in (0, 1]");
    std::size_t s = static_cast<std::size_t>(std::llround(t * static_cast<double>(horizon)));
    steps.push_back(std::clamp<std::size_t>(s, 1, horizon));
  }

  const std::uint64_t tag = fnv1a64("meander.branching");
  const std::size_t n_chunks = chunk_count(replicas);
  struct Partial {
    std::vector<double> w;
    std::vector<Vec2> pos;  // replica-major [replica * t_count + ti]
  };
  std::vector<Partial> parts(n_chunks);
  const std::size_t tc = steps.size();

  for_each_chunk(replicas, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    auto& part = parts[c];
    part.w.reserve(end - begin);
    part.pos.reserve((end - begin) * tc);
    for (std::size_t r = begin; r < end; ++r) {
      EnvStepSampler sampler(spec, derive_stream(stream, tag, r));
      double s1 = 0.0, s2 = 0.0;
      LogSumExp lse1, lse2;
      std::vector<Vec2> snaps(tc);
      for (std::size_t k = 1; k <= horizon; ++k) {
        const auto step = sampler.next_x();
        s1 += step[0];
        s2 += step[1];
        lse1.add(-s1);
        lse2.add(-s2);
        for (std::size_t ti = 0; ti < tc; ++ti)
          if (steps[ti] == k) snaps[ti] = {s1, s2};
      }
      const double y = survival_from_log_a(lse1.value(), z.z1) *
                       survival_from_log_a(lse2.value(), z.z2);
      part.w.push_back(y);
      for (std::size_t ti = 0; ti < tc; ++ti) part.pos.push_back(snaps[ti]);
    }
  });

  double wsum = 0.0, wsumsq = 0.0;
  for (const auto& part : parts)
    for (double w : part.w) {
      wsum += w;
      wsumsq += w * w;
    }
  if (!(wsum > 0.0))
    throw std::runtime_error("coexistence weights vanished for every environment");
  const double ess = wsum * wsum / wsumsq;
  if (ess < 500.0)
    throw std::runtime_error(
        "conditioned environment sample too small (effective size " +
        std::to_string(ess) + " < 500); use the h-transform walk sampler instead");

  const double scale = 1.0 / std::sqrt(static_cast<double>(horizon));
  std::vector<MarginalSamples> out(tc);
  for (std::size_t ti = 0; ti < tc; ++ti) {
    out[ti].t = t_grid[ti];
    out[ti].ess = ess;
  }
  for (const auto& part : parts) {
    for (std::size_t r = 0; r < part.w.size(); ++r) {
      const double w = part.w[r] / wsum;
      if (w <= 0.0) continue;
      for (std::size_t ti = 0; ti < tc; ++ti) {
        const Vec2 pos = part.pos[r * tc + ti];
        out[ti].coord1.push_back(pos.x1 * scale);
        out[ti].coord2.push_back(pos.x2 * scale);
        out[ti].radial.push_back(pos.norm() * scale);
        out[ti].weights.push_back(w);
      }
    }
  }
  return out;
}

struct MeanderRow {
  double t = 0.0;
  double ks_coord1 = 0.0, ks_coord2 = 0.0, ks_radial = 0.0;
  double ks_max() const { return std::max({ks_coord1, ks_coord2, ks_radial}); }
};

struct MeanderReport {
  std::vector<MeanderRow> rows;
  double ess_small = 0.0, ess_large = 0.0;
  std::size_t horizon_small = 0, horizon_large = 0;
};

inline MeanderReport compare_marginals(const std::vector<MarginalSamples>& small_h,
                                       const std::vector<MarginalSamples>& large_h) {
  if (small_h.size() != large_h.size())
    throw std::invalid_argument("marginal grids disagree");
  MeanderReport rep;
  for (std::size_t ti = 0; ti < small_h.size(); ++ti) {
    const auto& a = small_h[ti];
    const auto& b = large_h[ti];
    MeanderRow row;
    row.t = a.t;
    row.ks_coord1 = ks_distance(a.coord1, a.weights, b.coord1, b.weights);
    row.ks_coord2 = ks_distance(a.coord2, a.weights, b.coord2, b.weights);
    row.ks_radial = ks_distance(a.radial, a.weights, b.radial, b.weights);
    rep.rows.push_back(row);
  }
  rep.ess_small = small_h.front().ess;
  rep.ess_large = large_h.front().ess;
  return rep;
}

// Compares the law of the scaled conditioned marginal at each t across the
// horizons n and 4n; weak convergence makes the distance shrink.
inline MeanderReport meander_consistency_walk(const HarmonicApprox& approx,
                                              const EnvModelSpec& spec, Vec2 x,
                                              const std::vector<double>& t_grid,
                                              std::size_t horizon, std::size_t particles,
                                              std::uint64_t stream, unsigned threads = 0) {
  auto small_h = conditioned_walk_marginals(approx, spec, x, horizon, t_grid, particles,
                                            derive_stream(stream, fnv1a64("meander.small"), 0),
                                            threads);
  auto large_h = conditioned_walk_marginals(approx, spec, x, 4 * horizon, t_grid, particles,
                                            derive_stream(stream, fnv1a64("meander.large"), 0),
                                            threads);
  auto rep = compare_marginals(small_h, large_h);
  rep.horizon_small = horizon;
  rep.horizon_large = 4 * horizon;
  return rep;
}

// ---------------------------------------------------------------------------
// Closeness of log Z and S along co-surviving forward runs
// ---------------------------------------------------------------------------

struct ZsDeviationReport {
  double frequency = 0.0;  // conditional on co-survival, saturated runs excluded
  double stderr_ = 0.0;
  std::size_t co_surviving = 0;
  std::size_t saturated_excluded = 0;
  std::size_t replicas = 0;
  double epsilon = 0.0;
  std::size_t n = 0;
  double coexistence_rate = 0.0;  // co-surviving / replicas, for diagnostics
};

// Frequency of max_{k<=n} |log Z_i(k) - S_i(k)| >= eps sqrt(n) among
// co-surviving forward runs. log Z is only evaluated on co-surviving paths,
// where both coordinates stay positive for every k <= n.
inline ZsDeviationReport zs_deviation(const EnvModelSpec& spec, PopulationState z,
                                      std::size_t n, std::size_t replicas,
                                      double epsilon, std::uint64_t seed,
                                      unsigned threads = 0) {
  validate_population(z);
  if (z.z1 < 1 || z.z2 < 1)
    throw std::invalid_argument("zs_deviation needs both populations started positive");
  if (n < 1 || n > 2048)
    throw std::invalid_argument("zs_deviation forward simulation is limited to n <= 2048");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

  const double threshold = epsilon * std::sqrt(static_cast<double>(n));
  const std::uint64_t tag = fnv1a64("zs_deviation");
  const std::size_t n_chunks = chunk_count(replicas);
  struct Counts {
    std::size_t co_survive = 0, exceed = 0, saturated = 0;
  };
  std::vector<Counts> parts(n_chunks);

  for_each_chunk(replicas, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    auto& counts = parts[c];
    const double log_z1 = std::log(static_cast<double>(z.z1));
    const double log_z2 = std::log(static_cast<double>(z.z2));
    for (std::size_t r = begin; r < end; ++r) {
      EnvStepSampler sampler(spec, derive_stream(seed, tag, r));
      Rng& rng = sampler.engine();
      double s1 = 0.0, s2 = 0.0;
      std::int64_t z1 = z.z1, z2 = z.z2;
      double max_dev = std::fmax(std::fabs(log_z1), std::fabs(log_z2));
      bool alive = true, saturated = false;
      for (std::size_t k = 1; k <= n; ++k) {
        const auto x = sampler.next_x();
        const double p1 = success_prob_from_log_mean(x[0]);
        const double p2 = success_prob_from_log_mean(x[1]);
        z1 = sample_offspring_total(z1, p1, rng);
        z2 = sample_offspring_total(z2, p2, rng);
        if (z1 == kPopulationCap || z2 == kPopulationCap) {
          saturated = true;
          break;
        }
        if (z1 == 0 || z2 == 0) {
          alive = false;
          break;
        }
        s1 += x[0];
        s2 += x[1];
        const double d1 = std::fabs(std::log(static_cast<double>(z1)) - s1);
        const double d2 = std::fabs(std::log(static_cast<double>(z2)) - s2);
        max_dev = std::fmax(max_dev, std::fmax(d1, d2));
      }
      if (saturated) {
        ++counts.saturated;
      } else if (alive) {
        ++counts.co_survive;
        if (max_dev >= threshold) ++counts.exceed;
      }
    }
  });

  ZsDeviationReport rep;
  rep.replicas = replicas;
  rep.epsilon = epsilon;
  rep.n = n;
  std::size_t exceed = 0;
  for (const auto& c : parts) {
    rep.co_surviving += c.co_survive;
    rep.saturated_excluded += c.saturated;
    exceed += c.exceed;
  }
  if (rep.co_surviving == 0) {
    const auto curve = annealed_curve(spec, z, {n}, std::min<std::size_t>(replicas, 100000),
                                      derive_stream(seed, fnv1a64("zs.diag"), 0),
                                      CurveMode::Coexist, threads);
    throw std::runtime_error(
        "no co-surviving forward runs at n = " + std::to_string(n) +
        "; the quenched co-existence estimate there is " +
        std::to_string(curve.rows[0].estimate));
  }
  const double m = static_cast<double>(rep.co_surviving);
  rep.frequency = static_cast<double>(exceed) / m;
  rep.stderr_ = std::sqrt(rep.frequency * (1.0 - rep.frequency) / m);
  rep.coexistence_rate = m / static_cast<double>(replicas);
  return rep;
}

}  // namespace bpre
