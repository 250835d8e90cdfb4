#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpre/env.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rng.hpp"
#include "bpre/walk.hpp"

namespace bpre {

// ---------------------------------------------------------------------------
// Numerical stand-in for the harmonic function V of the killed walk.
//
// V has no closed form; away from the boundary V ~ u, and near it V is
// bounded by a multiple of u shifted into the interior along (1,1). The
// surrogate is u(T(x + R(1,1))), and estimate_V extends it m steps backward
// through the harmonicity identity V(x) = E[V(x + S(1)); tau_x > 1].
// ---------------------------------------------------------------------------

struct HarmonicApprox {
  ConeGeometry geometry;
  double offset = 2.0;        // interior shift R along (1,1)
  std::size_t depth = 64;     // backward extension steps m
  std::size_t replicas = 20000;

  double surrogate(Vec2 x) const {
    return u_harmonic(geometry, {x.x1 + offset, x.x2 + offset});
  }
};

inline HarmonicApprox make_harmonic_approx(double rho, double offset = 2.0,
                                           std::size_t depth = 64,
                                           std::size_t replicas = 20000) {
  if (offset < 0.0) throw std::invalid_argument("harmonic offset must be >= 0");
  return HarmonicApprox{cone_geometry(rho), offset, depth, replicas};
}

struct VEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  bool starved = false;  // every replica exited before reaching the depth
  std::size_t survivors = 0;
};

// Monte Carlo E[u(T(x + S(m) + R(1,1))); tau_x > m]; depth 0 reduces to the
// closed-form surrogate.
inline VEstimate estimate_V(const HarmonicApprox& approx, const EnvModelSpec& spec,
                            Vec2 x, std::uint64_t stream) {
  if (!strictly_inside_quadrant(x))
    throw std::invalid_argument("estimate_V requires an interior start point");
  if (std::fabs(spec.rho - approx.geometry.rho) > 1e-12)
    throw std::invalid_argument("environment and cone geometry disagree on rho");
  if (!(approx.surrogate(x) > 0.0))
    throw std::invalid_argument("surrogate vanishes at the start point; increase the offset");
  if (approx.depth == 0) return {approx.surrogate(x), 0.0, false, approx.replicas};
  if (approx.replicas < 1) throw std::invalid_argument("replicas must be >= 1");

  const std::uint64_t tag = fnv1a64("estimate_V");
  double sum = 0.0, sumsq = 0.0;
  std::size_t survivors = 0;
  for (std::size_t r = 0; r < approx.replicas; ++r) {
    EnvStepSampler sampler(spec, derive_stream(stream, tag, r));
    double s1 = x.x1, s2 = x.x2;
    bool alive = true;
    for (std::size_t k = 0; k < approx.depth; ++k) {
      const auto step = sampler.next_x();
      s1 += step[0];
      s2 += step[1];
      if (s1 <= 0.0 || s2 <= 0.0) {
        alive = false;
        break;
      }
    }
    double v = 0.0;
    if (alive) {
      ++survivors;
      v = approx.surrogate({s1, s2});
    }
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(approx.replicas);
  VEstimate est;
  est.survivors = survivors;
  est.value = sum / n;
  const double var = approx.replicas > 1
                         ? std::fmax(0.0, (sumsq - sum * sum / n) / (n - 1.0))
                         : 0.0;
  est.stderr_ = std::sqrt(var / n);
  est.starved = survivors == 0;
  return est;
}

// ---------------------------------------------------------------------------
// Sequential importance resampling under the Doob h-transform.
//
// Particles propagate under the environment law, are killed on leaving the
// quadrant, and carry weights multiplied by h(new)/h(old) with h the
// surrogate above. The raw weighted ensemble targets the h-transformed law;
// reweighting by 1/h(endpoint) recovers the law conditioned on tau_x > n, and
// the running normalization constant estimates P(tau_x > n).
// ---------------------------------------------------------------------------

struct HtransformOptions {
  std::vector<std::size_t> checkpoint_steps;  // ancestry-tracked snapshots
  unsigned threads = 0;
  double resample_ess_fraction = 0.5;
};

struct ParticleEnsemble {
  std::size_t horizon = 0;
  Vec2 start;
  double h_start = 0.0;
  std::vector<Vec2> positions;       // killed particles stay frozen, weight 0
  std::vector<double> weights;       // normalized; targets the h-transform law
  std::vector<double> h_end;         // surrogate at the final positions
  double log_norm = 0.0;             // log of the accumulated normalizer
  double ess = 0.0;
  std::size_t resample_count = 0;
  std::vector<std::size_t> checkpoint_steps;
  std::vector<std::vector<Vec2>> checkpoints;  // [checkpoint][particle]

  std::size_t size() const { return positions.size(); }

  // Weights for the law conditioned on surviving to the horizon.
  std::vector<double> conditioned_weights() const {
    std::vector<double> w(weights.size(), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (weights[j] > 0.0 && h_end[j] > 0.0) {
        w[j] = weights[j] / h_end[j];
        total += w[j];
      }
    }
    if (total <= 0.0)
      throw std::runtime_error("conditioned reweighting lost all particle mass");
    for (auto& v : w) v /= total;
    return w;
  }

  double conditioned_ess() const {
    const auto w = conditioned_weights();
    double s2 = 0.0;
    for (double v : w) s2 += v * v;
    return 1.0 / s2;
  }

  // Estimate of P(tau_x > horizon) from the normalization accumulator.
  double survival_probability() const {
    double corr = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j)
      if (weights[j] > 0.0 && h_end[j] > 0.0) corr += weights[j] * h_start / h_end[j];
    return std::exp(log_norm) * corr;
  }
};

inline ParticleEnsemble htransform_sample(const HarmonicApprox& approx,
                                          const EnvModelSpec& spec, Vec2 x,
                                          std::size_t n, std::size_t n_particles,
                                          std::uint64_t stream,
                                          const HtransformOptions& opts = {}) {
  if (!strictly_inside_quadrant(x))
    throw std::invalid_argument("htransform_sample requires an interior start point");
  if (n_particles < 100) throw std::invalid_argument("need at least 100 particles");
  if (n < 1) throw std::invalid_argument("horizon must be >= 1");
  if (std::fabs(spec.rho - approx.geometry.rho) > 1e-12)
    throw std::invalid_argument("environment and cone geometry disagree on rho");
  const double h0 = approx.surrogate(x);
  if (!(h0 > 0.0))
    throw std::invalid_argument("surrogate vanishes at the start point; increase the offset");

  const std::size_t N = n_particles;
  ParticleEnsemble ens;
  ens.horizon = n;
  ens.start = x;
  ens.h_start = h0;
  ens.positions.assign(N, x);
  ens.weights.assign(N, 1.0 / static_cast<double>(N));
  ens.h_end.assign(N, h0);
  ens.checkpoint_steps = opts.checkpoint_steps;
  std::sort(ens.checkpoint_steps.begin(), ens.checkpoint_steps.end());
  ens.checkpoints.assign(ens.checkpoint_steps.size(), {});

  std::vector<std::uint8_t> alive(N, 1);
  const std::uint64_t prop_tag = fnv1a64("htransform.propagate");
  std::vector<EnvStepSampler> samplers;
  samplers.reserve(N);
  for (std::size_t j = 0; j < N; ++j)
    samplers.emplace_back(spec, derive_stream(stream, prop_tag, j));
  Rng resample_rng(derive_stream(stream, fnv1a64("htransform.resample"), 0));

  std::vector<double> ratio(N, 0.0);
  std::size_t next_checkpoint = 0;

  // scratch buffers for systematic resampling
  std::vector<Vec2> pos_buf(N);
  std::vector<double> h_buf(N);
  std::vector<std::size_t> parent(N);

  for (std::size_t k = 1; k <= n; ++k) {
    parallel_index(N, opts.threads, [&](std::size_t j) {
      if (!alive[j]) {
        ratio[j] = 0.0;
        return;
      }
      const auto step = samplers[j].next_x();
      Vec2 pos = ens.positions[j] + Vec2{step[0], step[1]};
      if (pos.min() <= 0.0) {
        alive[j] = 0;  // frozen at the last interior position
        ratio[j] = 0.0;
        return;
      }
      const double h_new = approx.surrogate(pos);
      ratio[j] = h_new / ens.h_end[j];
      ens.positions[j] = pos;
      ens.h_end[j] = h_new;
    });

    double step_sum = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      ens.weights[j] *= ratio[j];
      step_sum += ens.weights[j];
    }
    if (!(step_sum > 0.0))
      throw std::runtime_error(
          "htransform_sample: total particle weight underflowed at step " +
          std::to_string(k) + " of " + std::to_string(n) +
          " (all particles exited); increase the particle count or the offset");
    ens.log_norm += std::log(step_sum);
    double sumsq = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      ens.weights[j] /= step_sum;
      sumsq += ens.weights[j] * ens.weights[j];
    }
    ens.ess = 1.0 / sumsq;

    while (next_checkpoint < ens.checkpoint_steps.size() &&
           k == ens.checkpoint_steps[next_checkpoint]) {
      ens.checkpoints[next_checkpoint] = ens.positions;
      ++next_checkpoint;
    }

    const bool last_step = k == n;
    if (!last_step && ens.ess < opts.resample_ess_fraction * static_cast<double>(N)) {
      // systematic resampling in fixed particle order
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      const double u = uni(resample_rng);
      double cum = 0.0;
      std::size_t j = 0;
      for (std::size_t i = 0; i < N; ++i) {
        const double target = (static_cast<double>(i) + u) / static_cast<double>(N);
        while ((ens.weights[j] == 0.0 || cum + ens.weights[j] < target) && j + 1 < N) {
          cum += ens.weights[j];
          ++j;
        }
        parent[i] = j;
      }
      for (std::size_t i = 0; i < N; ++i) {
        pos_buf[i] = ens.positions[parent[i]];
        h_buf[i] = ens.h_end[parent[i]];
      }
      ens.positions.swap(pos_buf);
      ens.h_end.swap(h_buf);
      for (std::size_t ci = 0; ci < next_checkpoint; ++ci) {
        auto& snap = ens.checkpoints[ci];
        for (std::size_t i = 0; i < N; ++i) pos_buf[i] = snap[parent[i]];
        snap.swap(pos_buf);
      }
      std::fill(alive.begin(), alive.end(), std::uint8_t{1});
      std::fill(ens.weights.begin(), ens.weights.end(), 1.0 / static_cast<double>(N));
      ens.ess = static_cast<double>(N);
      ++ens.resample_count;
    }
  }
  return ens;
}

// ---------------------------------------------------------------------------
// Entropic repulsion diagnostic
// ---------------------------------------------------------------------------

struct RepulsionRow {
  std::size_t n = 0;
  double fraction = 0.0;  // conditioned mass with min coordinate <= log^2 n
  double stderr_ = 0.0;
  std::size_t particles = 0;
};

struct RepulsionReport {
  std::vector<RepulsionRow> rows;
};

// Weighted fraction of h-transformed paths whose terminal minimum coordinate
// is at most log^2 n, one row per ensemble horizon.
inline RepulsionReport repulsion_report(const std::vector<ParticleEnsemble>& ensembles) {
  if (ensembles.empty()) throw std::invalid_argument("need at least one ensemble");
  for (std::size_t i = 1; i < ensembles.size(); ++i)
    if (ensembles[i].horizon <= ensembles[i - 1].horizon)
      throw std::invalid_argument("ensembles must have strictly increasing horizons");
  RepulsionReport report;
  report.rows.reserve(ensembles.size());
  for (const auto& ens : ensembles) {
    const double log_n = std::log(static_cast<double>(ens.horizon));
    const double threshold = log_n * log_n;
    double f = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j)
      if (ens.weights[j] > 0.0 && ens.positions[j].min() <= threshold)
        f += ens.weights[j];
    double var = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) {
      if (ens.weights[j] <= 0.0) continue;
      const double ind = ens.positions[j].min() <= threshold ? 1.0 : 0.0;
      var += ens.weights[j] * ens.weights[j] * (ind - f) * (ind - f);
    }
    report.rows.push_back({ens.horizon, f, std::sqrt(var), ens.size()});
  }
  return report;
}

}  // namespace bpre
