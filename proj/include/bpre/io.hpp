#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "bpre/estimators.hpp"
#include "bpre/harmonic.hpp"
#include "bpre/rng.hpp"
#include "bpre/version.hpp"
#include "bpre/walk.hpp"

namespace bpre {

// ---------------------------------------------------------------------------
// Number formatting: shortest decimal that round-trips exactly
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("malformed number: '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("malformed integer: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// ---------------------------------------------------------------------------
// Survival curve CSV: rho,family,z1,z2,n,estimate,stderr,replicas,seed
// ---------------------------------------------------------------------------

inline constexpr const char* kCurveCsvHeader =
    "rho,family,z1,z2,n,estimate,stderr,replicas,seed";

inline std::string curve_to_csv(const SurvivalCurve& curve) {
  if (curve.rows.empty()) throw std::invalid_argument("refusing to emit an empty curve");
  std::string out(kCurveCsvHeader);
  out += '\n';
  for (const auto& row : curve.rows) {
    out += format_double(curve.rho);
    out += ',';
    out += family_name(curve.family);
    out += ',';
    out += format_double(curve.z1);
    out += ',';
    out += format_double(curve.z2);
    out += ',';
    out += std::to_string(row.n);
    out += ',';
    out += format_double(row.estimate);
    out += ',';
    out += format_double(row.stderr_);
    out += ',';
    out += std::to_string(curve.replicas);
    out += ',';
    out += std::to_string(curve.seed);
    out += '\n';
  }
  return out;
}

inline SurvivalCurve curve_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty curve CSV");
  if (line != kCurveCsvHeader)
    throw std::invalid_argument("unexpected curve CSV header: '" + line + "'");
  SurvivalCurve curve;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw std::invalid_argument("bad curve CSV row: '" + line + "'");
    if (first) {
      curve.rho = parse_double(f[0]);
      curve.family = family_from_name(f[1]);
      curve.z1 = parse_double(f[2]);
      curve.z2 = parse_double(f[3]);
      curve.replicas = parse_u64(f[7]);
      curve.seed = parse_u64(f[8]);
      first = false;
    }
    curve.rows.push_back({static_cast<std::size_t>(parse_u64(f[4])),
                          parse_double(f[5]), parse_double(f[6])});
  }
  if (curve.rows.empty()) throw std::invalid_argument("curve CSV has no data rows");
  return curve;
}

inline SurvivalCurve load_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curve CSV: " + path.string());
  return curve_from_csv(in);
}

// ---------------------------------------------------------------------------
// Fit CSV: slope,stderr,ci_lo,ci_hi,intercept,theta_theory,n_min,points
// ---------------------------------------------------------------------------

inline constexpr const char* kFitCsvHeader =
    "slope,stderr,ci_lo,ci_hi,intercept,theta_theory,n_min,points";

inline std::string fit_to_csv(const ExponentFit& fit, double theta_theory) {
  std::string out(kFitCsvHeader);
  out += '\n';
  out += format_double(fit.slope);
  out += ',';
  out += format_double(fit.stderr_);
  out += ',';
  out += format_double(fit.ci_lo);
  out += ',';
  out += format_double(fit.ci_hi);
  out += ',';
  out += format_double(fit.intercept);
  out += ',';
  out += format_double(theta_theory);
  out += ',';
  out += std::to_string(fit.n_min);
  out += ',';
  out += std::to_string(fit.points_used);
  out += '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Repulsion CSV: n,fraction,stderr,particles
// ---------------------------------------------------------------------------

inline constexpr const char* kRepulsionCsvHeader = "n,fraction,stderr,particles";

inline std::string repulsion_to_csv(const RepulsionReport& report) {
  if (report.rows.empty()) throw std::invalid_argument("refusing to emit an empty report");
  std::string out(kRepulsionCsvHeader);
  out += '\n';
  for (const auto& row : report.rows) {
    out += std::to_string(row.n);
    out += ',';
    out += format_double(row.fraction);
    out += ',';
    out += format_double(row.stderr_);
    out += ',';
    out += std::to_string(row.particles);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Static SVG log-log plot: one circle per curve point, one fitted line, one
// theory line. Axes and ticks are paths so the two <line> elements are
// exactly the fit and the theory slope.
// ---------------------------------------------------------------------------

inline std::string survival_svg(const SurvivalCurve& curve, const ExponentFit& fit,
                                double theory_slope) {
  if (curve.rows.empty()) throw std::invalid_argument("refusing to plot an empty curve");
  const double width = 640, height = 480;
  const double ml = 70, mr = 20, mt = 20, mb = 50;

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : curve.rows) {
    if (!(row.estimate > 0.0)) continue;
    const double lx = std::log10(static_cast<double>(row.n));
    const double ly = std::log10(row.estimate);
    pts.emplace_back(lx, ly);
    xmin = std::min(xmin, lx);
    xmax = std::max(xmax, lx);
    ymin = std::min(ymin, ly);
    ymax = std::max(ymax, ly);
  }
  if (pts.empty()) throw std::invalid_argument("no positive estimates to plot");
  if (xmax - xmin < 1e-9) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-9) ymax = ymin + 1.0;
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.08 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double lx) { return ml + (lx - xmin) / (xmax - xmin) * (width - ml - mr); };
  auto sy = [&](double ly) { return height - mb - (ly - ymin) / (ymax - ymin) * (height - mt - mb); };
  const double ln10 = std::numbers::ln10;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height
      << "\">\n";
  svg << "<path d=\"M" << ml << ' ' << mt << " L" << ml << ' ' << height - mb << " L"
      << width - mr << ' ' << height - mb
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">log10 n</text>\n";
  svg << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 "
      << (mt + height - mb) / 2 << ")\">log10 estimate</text>\n";

  // fitted line over the plotted x range (fit was computed in natural logs)
  auto fit_y = [&](double lx) { return (fit.intercept + fit.slope * lx * ln10) / ln10; };
  svg << "<line x1=\"" << sx(xmin) << "\" y1=\"" << sy(fit_y(xmin)) << "\" x2=\""
      << sx(xmax) << "\" y2=\"" << sy(fit_y(xmax))
      << "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
  // theory slope anchored at the last point
  const double ax = pts.back().first, ay = pts.back().second;
  auto theory_y = [&](double lx) { return ay + theory_slope * (lx - ax); };
  svg << "<line x1=\"" << sx(xmin) << "\" y1=\"" << sy(theory_y(xmin)) << "\" x2=\""
      << sx(xmax) << "\" y2=\"" << sy(theory_y(xmax))
      << "\" stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";

  svg << "<g id=\"points\" fill=\"black\">\n";
  for (const auto& [lx, ly] : pts)
    svg << "<circle cx=\"" << sx(lx) << "\" cy=\"" << sy(ly) << "\" r=\"3\"/>\n";
  svg << "</g>\n";
  svg << "<text x=\"" << width - mr - 8 << "\" y=\"" << mt + 16
      << "\" text-anchor=\"end\" font-size=\"13\">fit slope " << format_double(fit.slope)
      << ", theory " << format_double(theory_slope) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------
// Files, digests, manifests
// ---------------------------------------------------------------------------

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string fnv1a64_hex_of_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot digest " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

struct RunManifest {
  nlohmann::json config;  // echoed flags, sufficient to reproduce the run
  std::string artifact_version = kArtifactVersion;
  double duration_seconds = 0.0;
  nlohmann::json output_digests;  // file name -> fnv1a64 hex
  std::string stream_rule = kStreamRule;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  return nlohmann::json{{"config", m.config},
                        {"artifact_version", m.artifact_version},
                        {"duration_seconds", m.duration_seconds},
                        {"output_digests", m.output_digests},
                        {"stream_rule", m.stream_rule}};
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_file(path, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace bpre
