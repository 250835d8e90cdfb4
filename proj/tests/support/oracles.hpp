#pragma once

// Test-side oracles, independent of the library code paths they check.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "bpre/env.hpp"
#include "bpre/walk.hpp"

namespace oracles {

// Survival probability of one coordinate through the generating-function
// route: for geometric offspring with success p the reproduction gf is
// f(s) = p/(1-(1-p)s); starting from z ancestors the extinction probability
// after environments p_1..p_n is (f_1(f_2(...f_n(0))))^z.
inline double gf_survival(const std::vector<double>& p_seq, std::int64_t z) {
  double s = 0.0;
  for (auto it = p_seq.rbegin(); it != p_seq.rend(); ++it) {
    const double p = *it;
    s = p / (1.0 - (1.0 - p) * s);
  }
  return 1.0 - std::pow(s, static_cast<double>(z));
}

// High-precision direct sum of e^{-S(k)} in long double; log of the result.
inline long double direct_log_a(const std::vector<double>& s_values) {
  long double a = 0.0L;
  for (double s : s_values) a += std::exp(-static_cast<long double>(s));
  return std::log(a);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Covariance-weighted Laplacian u_11 + 2 rho u_12 + u_22 by central finite
// differences; vanishes for the harmonic surrogate of the rho-cone.
inline double sigma_laplacian_fd(const bpre::ConeGeometry& geom, bpre::Vec2 x, double h) {
  auto u = [&](double a, double b) { return bpre::u_harmonic(geom, {a, b}); };
  const double uxx = (u(x.x1 + h, x.x2) - 2.0 * u(x.x1, x.x2) + u(x.x1 - h, x.x2)) / (h * h);
  const double uyy = (u(x.x1, x.x2 + h) - 2.0 * u(x.x1, x.x2) + u(x.x1, x.x2 - h)) / (h * h);
  const double uxy = (u(x.x1 + h, x.x2 + h) + u(x.x1 - h, x.x2 - h) -
                      u(x.x1 + h, x.x2 - h) - u(x.x1 - h, x.x2 + h)) /
                     (4.0 * h * h);
  return uxx + 2.0 * geom.rho * uxy + uyy;
}

// Naive rescan of the exit rule, used as an oracle for exit_time.
inline std::optional<std::size_t> naive_exit_scan(bpre::Vec2 x, const bpre::WalkPath& walk) {
  for (std::size_t k = 1; k < walk.s.size(); ++k) {
    const double c1 = x.x1 + walk.s[k].x1;
    const double c2 = x.x2 + walk.s[k].x2;
    if (std::min(c1, c2) <= 0.0) return k;
  }
  return std::nullopt;
}

// Endpoint law of the discrete walk conditioned on staying strictly inside
// the quadrant for n steps, by full enumeration. Keys are the integer step
// sums (S_1(n), S_2(n)).
inline std::map<std::pair<int, int>, double> enumerate_conditioned_endpoints(
    double rho, bpre::Vec2 x, std::size_t n) {
  if (n > 10) throw std::invalid_argument("enumeration horizon too large");
  const double pa = 0.25 * (1.0 + rho), pb = 0.25 * (1.0 - rho);
  const std::array<std::array<int, 2>, 4> steps{{{1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};
  const std::array<double, 4> probs{pa, pa, pb, pb};
  std::map<std::pair<int, int>, double> law;
  double total = 0.0;
  auto recurse = [&](auto&& self, std::size_t k, int s1, int s2, double prob) -> void {
    if (k == n) {
      law[{s1, s2}] += prob;
      total += prob;
      return;
    }
    for (int d = 0; d < 4; ++d) {
      if (probs[d] == 0.0) continue;
      const int n1 = s1 + steps[d][0], n2 = s2 + steps[d][1];
      if (x.x1 + n1 <= 0.0 || x.x2 + n2 <= 0.0) continue;
      self(self, k + 1, n1, n2, prob * probs[d]);
    }
  };
  recurse(recurse, 0, 0, 0, 1.0);
  if (!(total > 0.0)) throw std::runtime_error("conditioning event is empty");
  for (auto& [key, value] : law) value /= total;
  return law;
}

}  // namespace oracles
