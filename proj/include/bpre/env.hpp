#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpre/rng.hpp"

namespace bpre {

// ---------------------------------------------------------------------------
// Environment model: i.i.d. pairs X = (X1, X2) of log conditional offspring
// means with E X_i = 0, E X_i^2 = 1, E X1 X2 = rho, paired with the geometric
// success parameters p_i = 1/(1 + e^{X_i}).
// ---------------------------------------------------------------------------

enum class EnvFamily {
  GaussianSigmoid,   // X bivariate standard normal with correlation rho
  DiscreteFourPoint  // X on {-1,+1}^2, exact moments, enumerable
};

inline const char* family_name(EnvFamily f) {
  return f == EnvFamily::GaussianSigmoid ? "gaussian" : "discrete";
}

inline EnvFamily family_from_name(const std::string& s) {
  if (s == "gaussian") return EnvFamily::GaussianSigmoid;
  if (s == "discrete") return EnvFamily::DiscreteFourPoint;
  throw std::invalid_argument("unknown environment family: " + s);
}

struct EnvModelSpec {
  EnvFamily family = EnvFamily::GaussianSigmoid;
  double rho = 0.0;
  bool degenerate() const { return rho == 1.0 || rho == -1.0; }
};

inline void require_rho_in_closed_range(double rho) {
  if (!(rho >= -1.0 && rho <= 1.0))
    throw std::invalid_argument("rho must lie in [-1, 1]");
}

inline EnvModelSpec make_gaussian_env(double rho) {
  require_rho_in_closed_range(rho);
  return EnvModelSpec{EnvFamily::GaussianSigmoid, rho};
}

inline EnvModelSpec make_discrete_env(double rho) {
  require_rho_in_closed_range(rho);
  return EnvModelSpec{EnvFamily::DiscreteFourPoint, rho};
}

// Exact inverse pair X = log((1-p)/p)  <->  p = 1/(1+e^X).
inline double success_prob_from_log_mean(double x) { return 1.0 / (1.0 + std::exp(x)); }

inline double log_mean_from_success_prob(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("success probability must lie in (0, 1)");
  return std::log1p(-p) - std::log(p);
}

struct EnvStep {
  std::array<double, 2> x;  // log conditional means
  std::array<double, 2> p;  // geometric success parameters
};

struct EnvPath {
  std::vector<EnvStep> steps;
  std::uint64_t stream = 0;  // provenance: the rng stream that produced it
};

// Hot-path sampler for the log-mean pair; constructed once per replica.
class EnvStepSampler {
 public:
  EnvStepSampler(const EnvModelSpec& spec, std::uint64_t stream)
      : rng_(stream),
        family_(spec.family),
        rho_(spec.rho),
        tail_(std::sqrt(std::fmax(0.0, 1.0 - spec.rho * spec.rho))),
        cum1_(0.25 * (1.0 + spec.rho)),
        cum2_(0.50 * (1.0 + spec.rho)),
        cum3_(0.25 * (3.0 + spec.rho)) {}

  std::array<double, 2> next_x() {
    if (family_ == EnvFamily::GaussianSigmoid) {
      const double z1 = normal_(rng_);
      const double z2 = normal_(rng_);
      return {z1, rho_ * z1 + tail_ * z2};
    }
    const double u = uniform_(rng_);
    if (u < cum1_) return {1.0, 1.0};
    if (u < cum2_) return {-1.0, -1.0};
    if (u < cum3_) return {1.0, -1.0};
    return {-1.0, 1.0};
  }

  Rng& engine() { return rng_; }

 private:
  Rng rng_;
  EnvFamily family_;
  double rho_;
  double tail_;
  double cum1_, cum2_, cum3_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline EnvPath sample_env_path(const EnvModelSpec& spec, std::size_t n,
                               std::uint64_t stream) {
  if (n < 1) throw std::invalid_argument("environment path length must be >= 1");
  EnvPath path;
  path.stream = stream;
  path.steps.resize(n);
  EnvStepSampler sampler(spec, stream);
  for (std::size_t k = 0; k < n; ++k) {
    const auto x = sampler.next_x();
    path.steps[k].x = x;
    path.steps[k].p = {success_prob_from_log_mean(x[0]),
                       success_prob_from_log_mean(x[1])};
  }
  return path;
}

// ---------------------------------------------------------------------------
// Moment diagnostics
// ---------------------------------------------------------------------------

struct MomentReport {
  std::size_t n_draws = 0;
  std::array<double, 2> mean{}, mean_se{};
  std::array<double, 2> second{}, second_se{};  // raw second moments, target 1
  double cross = 0.0, cross_se = 0.0;           // raw cross moment, target rho
  std::array<double, 2> variance{};
  double pearson_corr = 0.0;
  std::vector<std::string> flags;  // any raw moment > 4 standard errors off
  bool flagged() const { return !flags.empty(); }
};

inline MomentReport env_moment_report(const EnvModelSpec& spec, std::size_t n_draws,
                                      std::uint64_t stream) {
  if (n_draws < 1000)
    throw std::invalid_argument("moment report requires at least 1000 draws");
  EnvStepSampler sampler(spec, stream);
  const double n = static_cast<double>(n_draws);

  std::array<double, 2> sum{}, sumsq{}, sum4{};
  double sum_cross = 0.0, sum_cross_sq = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const auto x = sampler.next_x();
    for (int j = 0; j < 2; ++j) {
      sum[j] += x[j];
      sumsq[j] += x[j] * x[j];
      sum4[j] += x[j] * x[j] * x[j] * x[j];
    }
    const double c = x[0] * x[1];
    sum_cross += c;
    sum_cross_sq += c * c;
  }

  MomentReport r;
  r.n_draws = n_draws;
  auto se_of_mean = [&](double s, double ssq) {
    const double m = s / n;
    const double var = std::fmax(0.0, ssq / n - m * m);
    return std::sqrt(var / n);
  };
  for (int j = 0; j < 2; ++j) {
    r.mean[j] = sum[j] / n;
    r.mean_se[j] = se_of_mean(sum[j], sumsq[j]);
    r.second[j] = sumsq[j] / n;
    r.second_se[j] = se_of_mean(sumsq[j], sum4[j]);
    r.variance[j] = std::fmax(0.0, r.second[j] - r.mean[j] * r.mean[j]);
  }
  r.cross = sum_cross / n;
  r.cross_se = se_of_mean(sum_cross, sum_cross_sq);
  const double denom = std::sqrt(r.variance[0] * r.variance[1]);
  r.pearson_corr = denom > 0.0
                       ? (r.cross - r.mean[0] * r.mean[1]) / denom
                       : (spec.rho > 0 ? 1.0 : -1.0);

  auto flag = [&](const char* what, double value, double target, double se) {
    const double dev = std::fabs(value - target);
    if (dev > 4.0 * se) {
      r.flags.push_back(std::string(what) + " off target by " +
                        std::to_string(dev) + " (se " + std::to_string(se) + ")");
    }
  };
  flag("mean[1]", r.mean[0], 0.0, r.mean_se[0]);
  flag("mean[2]", r.mean[1], 0.0, r.mean_se[1]);
  flag("second[1]", r.second[0], 1.0, r.second_se[0]);
  flag("second[2]", r.second[1], 1.0, r.second_se[1]);
  flag("cross", r.cross, spec.rho, r.cross_se);
  return r;
}

}  // namespace bpre
