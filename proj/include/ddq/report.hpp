#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ddq/ddecomp.hpp"
#include "ddq/error.hpp"
#include "ddq/generators.hpp"
#include "ddq/regularizers.hpp"

namespace ddq {

inline constexpr std::string_view kVersion = "0.1.0";

using json = nlohmann::json;

/// One method applied to one cell (class x seed, grid point, n, ...).
/// Non-finite numbers serialize as null.
struct RunRecord {
  std::string method;
  std::string cell;
  std::uint64_t seed = 0;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> rmse;
  std::optional<double> kappa_d;
  std::size_t iters = 0;
  double wall_ms = 0.0;
  json params = json::object();  // cell-specific numbers: lambda, beta, eps, ...
  std::optional<std::string> error;

  bool ok() const noexcept { return !error.has_value(); }
};

struct ExperimentReport {
  std::string kind;
  json config = json::object();
  std::vector<RunRecord> runs;
  json aggregates = json::object();
  std::string version{kVersion};
};

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

inline json to_json(const GeneratorSpec& s) {
  json j{{"kind", std::string(to_string(s.kind))}, {"seed", s.seed}};
  switch (s.kind) {
    case GeneratorKind::worked_example: j["example_id"] = s.example_id; break;
    case GeneratorKind::spectral_decay: j["n"] = s.n; break;
    case GeneratorKind::noisy_sparse:
      j["n"] = s.n;
      j["k"] = s.k;
      j["density"] = s.density;
      j["sigma_noise"] = s.sigma_noise;
      break;
    case GeneratorKind::perturbed:
      j["n"] = s.n;
      j["k"] = s.k;
      j["eps"] = s.eps;
      break;
    default:
      j["n"] = s.n;
      j["k"] = s.k;
  }
  return j;
}

inline json to_json(const RegularizerConfig& r) {
  json j{{"lambda", r.lambda}, {"alpha1", r.alpha1}, {"alpha2", r.alpha2}, {"alpha3", r.alpha3}, {"beta", r.beta}};
  j["kappa_cap"] = r.kappa_cap ? json(*r.kappa_cap) : json(nullptr);
  return j;
}

inline json to_json(const SolverConfig& c) {
  return {{"k", c.k},
          {"tol", c.tol},
          {"max_iters", c.max_iters},
          {"d_update", std::string(to_string(c.d_update))},
          {"init", std::string(to_string(c.init))},
          {"seed", c.seed},
          {"stop", std::string(to_string(c.stop))}};
}

inline json to_json(const RunRecord& r) {
  json j{{"method", r.method},
         {"cell", r.cell},
         {"seed", r.seed},
         {"rel_error", number_or_null(r.rel_error)},
         {"iters", r.iters},
         {"wall_ms", number_or_null(r.wall_ms)},
         {"params", r.params}};
  if (r.rmse) j["rmse"] = number_or_null(*r.rmse);
  if (r.kappa_d) j["kappa_d"] = number_or_null(*r.kappa_d);
  if (r.error) j["error"] = *r.error;
  return j;
}

inline json to_json(const ExperimentReport& rep) {
  json runs = json::array();
  for (const auto& r : rep.runs) runs.push_back(to_json(r));
  return {{"kind", rep.kind},
          {"config", rep.config},
          {"runs", std::move(runs)},
          {"aggregates", rep.aggregates},
          {"version", rep.version}};
}

inline RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.method = j.at("method").get<std::string>();
  r.cell = j.at("cell").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.rel_error = number_from(j.at("rel_error"));
  r.iters = j.at("iters").get<std::size_t>();
  r.wall_ms = number_from(j.at("wall_ms"));
  r.params = j.value("params", json::object());
  if (j.contains("rmse")) r.rmse = number_from(j["rmse"]);
  if (j.contains("kappa_d")) r.kappa_d = number_from(j["kappa_d"]);
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  return r;
}

inline ExperimentReport report_from_json(const json& j) {
  ExperimentReport rep;
  try {
    rep.kind = j.at("kind").get<std::string>();
    rep.config = j.at("config");
    for (const auto& r : j.at("runs")) rep.runs.push_back(run_record_from_json(r));
    rep.aggregates = j.at("aggregates");
    rep.version = j.at("version").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("report document: ") + e.what());
  }
  return rep;
}

struct Summary {
  std::size_t count = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();  // sample (n - 1) standard deviation
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
};

/// Statistics over the finite entries of xs.
inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  std::vector<double> v;
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

inline json to_json(const Summary& s) {
  return {{"count", s.count},
          {"mean", number_or_null(s.mean)},
          {"std", number_or_null(s.std)},
          {"min", number_or_null(s.min)},
          {"max", number_or_null(s.max)}};
}

/// Least-squares slope of log(y) against log(x) over points with x, y > 0.
/// Empty when fewer than two distinct x remain.
inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i]))
      pts.emplace_back(std::log(x[i]), std::log(y[i]));
  if (pts.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (auto [a, b] : pts) {
    mx += a;
    my += b;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto [a, b] : pts) {
    sxx += (a - mx) * (a - mx);
    sxy += (a - mx) * (b - my);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

/// Per (cell, method) statistics of rel_error, kappa_d, iters and wall_ms,
/// keyed "cell/method".
inline json group_summaries(const std::vector<RunRecord>& runs) {
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) groups[r.cell + "/" + r.method].push_back(&r);
  json out = json::object();
  for (const auto& [key, members] : groups) {
    std::vector<double> err, kap, it, ms;
    std::size_t failed = 0;
    for (const RunRecord* r : members) {
      if (!r->ok()) {
        ++failed;
        continue;
      }
      err.push_back(r->rel_error);
      if (r->kappa_d) kap.push_back(*r->kappa_d);
      it.push_back(static_cast<double>(r->iters));
      ms.push_back(r->wall_ms);
    }
    json g{{"rel_error", to_json(summarize(err))},
           {"iters", to_json(summarize(it))},
           {"wall_ms", to_json(summarize(ms))},
           {"failed", failed}};
    if (!kap.empty()) g["kappa_d"] = to_json(summarize(kap));
    out[key] = std::move(g);
  }
  return out;
}

}  // namespace ddq
