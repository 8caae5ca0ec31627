#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "ddq/baselines.hpp"
#include "ddq/ddecomp.hpp"
#include "ddq/error.hpp"
#include "ddq/generators.hpp"
#include "ddq/metrics.hpp"
#include "ddq/regularizers.hpp"
#include "ddq/report.hpp"

namespace ddq {

/// Parallelism for independent cells. 0 and 1 both run serially.
struct ExecutionOptions {
  std::size_t threads = 0;
};

/// DDQ_THREADS, or 0 when unset or empty.
inline std::size_t threads_from_env() {
  const char* raw = std::getenv("DDQ_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  const std::string_view s(raw);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorKind::InvalidArgument, "DDQ_THREADS must be a non-negative integer, got '" + std::string(s) + "'");
  return v;
}

/// Cap applied when run_ablation_beta derives kappa_cap: 10^(j/2), j = 1..12.
inline std::vector<double> kappa_cap_ladder() {
  std::vector<double> caps;
  for (int j = 1; j <= 12; ++j) caps.push_back(std::pow(10.0, 0.5 * j));
  return caps;
}

namespace detail {

// Runs body(i) for i in [0, count). Each index writes only its own slot, so the
// result does not depend on scheduling.
inline void run_cells(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(threads, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(count);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline RunRecord failed_record(std::string method, std::string cell, std::uint64_t seed, const std::exception& e) {
  RunRecord r;
  r.method = std::move(method);
  r.cell = std::move(cell);
  r.seed = seed;
  r.error = e.what();
  return r;
}

inline RunRecord baseline_record(const DenseMatrix& a, const LowRankApprox& approx, std::string cell,
                                 std::uint64_t seed, double ms) {
  RunRecord r;
  r.method = approx.method;
  r.cell = std::move(cell);
  r.seed = seed;
  r.rel_error = relative_frobenius_error(a, approx.approx);
  r.wall_ms = ms;
  return r;
}

inline RunRecord solve_record(const DenseMatrix& a, const SolveResult& s, std::string cell, std::uint64_t seed,
                              double ms) {
  RunRecord r;
  r.method = "ddecomp";
  r.cell = std::move(cell);
  r.seed = seed;
  const auto& last = s.trace.final_record();
  r.rel_error = relative_frobenius_error(a, s.factors.product());
  r.kappa_d = last.kappa_d;
  r.iters = s.trace.iterations();
  r.wall_ms = ms;
  r.params["residual"] = number_or_null(last.residual);
  r.params["objective"] = number_or_null(last.objective);
  r.params["status"] = std::string(to_string(s.trace.status));
  return r;
}

inline std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string spec_label(const GeneratorSpec& s) {
  if (s.kind == GeneratorKind::worked_example) return "worked_example:" + s.example_id;
  return std::string(to_string(s.kind));
}

// Median of the per-sweep times; records[0] is the initial state and is skipped.
inline double median_sweep_ms(const ConvergenceTrace& t) {
  std::vector<double> ms;
  for (std::size_t i = 1; i < t.records.size(); ++i) ms.push_back(t.records[i].wall_ms);
  if (ms.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(ms.begin(), ms.end());
  const std::size_t h = ms.size() / 2;
  return ms.size() % 2 ? ms[h] : 0.5 * (ms[h - 1] + ms[h]);
}

inline std::vector<RunRecord> flatten(std::vector<std::vector<RunRecord>>&& cells) {
  std::vector<RunRecord> out;
  for (auto& c : cells)
    for (auto& r : c) out.push_back(std::move(r));
  return out;
}

}  // namespace detail

/// Every class x seed cell runs truncated SVD, randomized SVD, CUR and the
/// D-decomposition solver on the same matrix. The generator seed, the
/// randomized baselines' seed and the solver seed are all the cell's seed.
inline ExperimentReport run_benchmark(const std::vector<GeneratorSpec>& classes, std::size_t k,
                                      const RegularizerConfig& reg, const SolverConfig& solver,
                                      const std::vector<std::uint64_t>& seeds, const ExecutionOptions& exec = {}) {
  if (classes.empty()) throw Error(ErrorKind::InvalidArgument, "benchmark needs at least one class");
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "benchmark needs at least one seed");
  reg.validate();
  for (const auto& c : classes) c.validate();

  ExperimentReport rep;
  rep.kind = "benchmark";
  json cls = json::array();
  for (const auto& c : classes) cls.push_back(to_json(c));
  SolverConfig base = solver;
  base.k = k;
  base.validate();
  rep.config = {{"classes", cls},
                {"k", k},
                {"regularizer", to_json(reg)},
                {"solver", to_json(base)},
                {"seeds", seeds},
                {"oversample", 10},
                {"power_iters", 2}};

  const std::size_t cells = classes.size() * seeds.size();
  std::vector<std::vector<RunRecord>> out(cells);
  detail::run_cells(cells, exec.threads, [&](std::size_t idx) {
    GeneratorSpec spec = classes[idx / seeds.size()];
    const std::uint64_t seed = seeds[idx % seeds.size()];
    spec.seed = seed;
    const std::string cell = detail::spec_label(spec);
    auto& recs = out[idx];

    DenseMatrix a;
    std::optional<std::vector<bool>> mask;
    try {
      if (spec.kind == GeneratorKind::noisy_sparse) {
        auto parts = gen_noisy_sparse_parts(spec.n, spec.k, spec.density, spec.sigma_noise, spec.seed);
        std::vector<bool> m(parts.base.size());
        const auto b = parts.base.values();
        for (std::size_t i = 0; i < b.size(); ++i) m[i] = b[i] != 0.0;
        mask = std::move(m);
        a = std::move(parts.noisy);
      } else {
        a = generate(spec);
      }
    } catch (const std::exception& e) {
      for (const char* m : {"truncated_svd", "randomized_svd", "cur", "ddecomp"})
        recs.push_back(detail::failed_record(m, cell, seed, e));
      return;
    }
    auto add_rmse = [&](RunRecord& r, const DenseMatrix& approx) {
      if (mask) r.rmse = rmse_masked(a, approx, *mask);
    };

    auto run_baseline = [&](const char* name, auto&& fn) {
      try {
        const auto t0 = std::chrono::steady_clock::now();
        LowRankApprox approx = fn();
        RunRecord r = detail::baseline_record(a, approx, cell, seed, detail::elapsed_ms(t0));
        add_rmse(r, approx.approx);
        recs.push_back(std::move(r));
      } catch (const Error& e) {
        recs.push_back(detail::failed_record(name, cell, seed, e));
      }
    };
    run_baseline("truncated_svd", [&] { return truncated_svd(a, k); });
    run_baseline("randomized_svd", [&] { return randomized_svd(a, k, 10, 2, seed); });
    run_baseline("cur", [&] { return cur(a, k, 10, seed); });
    try {
      SolverConfig cfg = base;
      cfg.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      SolveResult s = solve(a, reg, cfg);
      RunRecord r = detail::solve_record(a, s, cell, seed, detail::elapsed_ms(t0));
      add_rmse(r, s.factors.product());
      recs.push_back(std::move(r));
    } catch (const Error& e) {
      recs.push_back(detail::failed_record("ddecomp", cell, seed, e));
    }
  });
  rep.runs = detail::flatten(std::move(out));
  rep.aggregates = {{"groups", group_summaries(rep.runs)}};
  return rep;
}

/// Solves A0 = low_rank(n, k, seed) and each A0 + E(eps) from the same
/// starting factors (those the solver config gives for A0), and records
/// |D* - D0|_F between the gauge-normalized cores.
inline ExperimentReport run_perturbation_study(std::size_t n, std::size_t k, const std::vector<double>& eps_list,
                                               const RegularizerConfig& reg, const SolverConfig& solver,
                                               const std::vector<std::uint64_t>& seeds,
                                               const ExecutionOptions& exec = {}) {
  if (eps_list.empty()) throw Error(ErrorKind::InvalidArgument, "eps list is empty");
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "perturbation study needs at least one seed");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] >= 0.0) || !std::isfinite(eps_list[i]))
      throw Error(ErrorKind::InvalidArgument, "eps values must be finite and >= 0");
    if (i > 0 && eps_list[i] < eps_list[i - 1]) throw Error(ErrorKind::InvalidArgument, "eps list must be ascending");
  }
  reg.validate();
  SolverConfig base = solver;
  base.k = k;
  base.validate();

  GeneratorSpec gen;
  gen.n = n;
  gen.k = k;
  ExperimentReport rep;
  rep.kind = "perturb";
  rep.config = {{"n", n},
                {"k", k},
                {"eps", eps_list},
                {"regularizer", to_json(reg)},
                {"solver", to_json(base)},
                {"seeds", seeds},
                {"generator", to_json(gen)}};

  std::vector<std::vector<RunRecord>> out(seeds.size());
  detail::run_cells(seeds.size(), exec.threads, [&](std::size_t idx) {
    const std::uint64_t seed = seeds[idx];
    auto& recs = out[idx];
    auto cell_of = [](double eps) { return "eps=" + detail::format_number(eps); };
    try {
      const DenseMatrix a0 = gen_low_rank(n, k, seed);
      SolverConfig cfg = base;
      cfg.seed = seed;
      const FactorTriple start = init_factors(a0, cfg);
      const SolveResult s0 = solve_from(a0, start, reg, cfg);
      const FactorTriple d0 = normalize_gauge(s0.factors);
      for (double eps : eps_list) {
        try {
          const DenseMatrix a = gen_perturbed(a0, eps, seed);
          const auto t0 = std::chrono::steady_clock::now();
          const SolveResult s = solve_from(a, start, reg, cfg);
          const double ms = detail::elapsed_ms(t0);
          RunRecord r = detail::solve_record(a, s, cell_of(eps), seed, ms);
          r.params["eps"] = eps;
          r.params["d_diff"] = number_or_null(frobenius_distance(normalize_gauge(s.factors).d, d0.d));
          recs.push_back(std::move(r));
        } catch (const Error& e) {
          recs.push_back(detail::failed_record("ddecomp", cell_of(eps), seed, e));
        }
      }
    } catch (const Error& e) {
      for (double eps : eps_list) recs.push_back(detail::failed_record("ddecomp", cell_of(eps), seed, e));
    }
  });
  rep.runs = detail::flatten(std::move(out));

  // slope of the per-eps mean of |D* - D0|_F
  std::vector<double> xs, ys;
  json per_eps = json::array();
  for (double eps : eps_list) {
    std::vector<double> diffs;
    for (const auto& r : rep.runs)
      if (r.ok() && r.params.value("eps", -1.0) == eps) diffs.push_back(number_from(r.params["d_diff"]));
    const Summary s = summarize(diffs);
    per_eps.push_back({{"eps", eps}, {"d_diff", to_json(s)}});
    xs.push_back(eps);
    ys.push_back(s.mean);
  }
  const auto slope = loglog_slope(xs, ys);
  rep.aggregates = {{"groups", group_summaries(rep.runs)},
                    {"d_diff_by_eps", per_eps},
                    {"slope", slope ? json(*slope) : json(nullptr)}};
  return rep;
}

/// One solve per beta, all from the same starting factors. beta = 0 runs
/// without the condition term. For beta > 0 the cap is reg_base.kappa_cap when
/// set; otherwise every cap of kappa_cap_ladder() is tried and the one whose
/// solution has the lowest full objective (including beta log kappa) is kept.
inline ExperimentReport run_ablation_beta(const DenseMatrix& a, std::size_t k, const std::vector<double>& beta_list,
                                          const RegularizerConfig& reg_base, const SolverConfig& solver,
                                          const ExecutionOptions& exec = {}) {
  if (std::find(beta_list.begin(), beta_list.end(), 0.0) == beta_list.end())
    throw Error(ErrorKind::InvalidArgument, "beta list must include 0");
  for (double b : beta_list)
    if (!(b >= 0.0) || !std::isfinite(b)) throw Error(ErrorKind::InvalidArgument, "beta values must be >= 0");
  reg_base.validate();
  SolverConfig cfg = solver;
  cfg.k = k;
  cfg.validate();

  ExperimentReport rep;
  rep.kind = "ablate";
  rep.config = {{"k", k},
                {"betas", beta_list},
                {"regularizer", to_json(reg_base)},
                {"solver", to_json(cfg)},
                {"matrix", {{"rows", a.rows()}, {"cols", a.cols()}, {"frobenius_norm", frobenius_norm(a)}}}};
  if (!reg_base.kappa_cap) rep.config["kappa_cap_ladder"] = kappa_cap_ladder();

  const FactorTriple start = init_factors(a, cfg);
  std::vector<std::vector<RunRecord>> out(beta_list.size());
  detail::run_cells(beta_list.size(), exec.threads, [&](std::size_t idx) {
    const double beta = beta_list[idx];
    const std::string cell = "beta=" + detail::format_number(beta);
    try {
      RegularizerConfig reg = reg_base;
      reg.beta = beta;
      std::vector<std::optional<double>> caps;
      if (beta == 0.0)
        caps.push_back(std::nullopt);
      else if (reg_base.kappa_cap)
        caps.push_back(reg_base.kappa_cap);
      else
        for (double c : kappa_cap_ladder()) caps.push_back(c);

      std::optional<RunRecord> best;
      double best_obj = std::numeric_limits<double>::infinity();
      for (const auto& cap : caps) {
        reg.kappa_cap = cap;
        const auto t0 = std::chrono::steady_clock::now();
        const SolveResult s = solve_from(a, start, reg, cfg);
        const double ms = detail::elapsed_ms(t0);
        const double obj = s.trace.final_record().objective;
        if (!best || obj < best_obj) {
          best_obj = obj;
          best = detail::solve_record(a, s, cell, cfg.seed, ms);
          best->params["kappa_cap"] = cap ? json(*cap) : json(nullptr);
        }
      }
      best->params["beta"] = beta;
      out[idx].push_back(std::move(*best));
    } catch (const Error& e) {
      out[idx].push_back(detail::failed_record("ddecomp", cell, cfg.seed, e));
    }
  });
  rep.runs = detail::flatten(std::move(out));

  // kappa and error as functions of beta, in ascending beta order
  std::vector<std::size_t> order(beta_list.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return beta_list[x] < beta_list[y]; });
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> errs;
  for (std::size_t i : order) {
    const RunRecord& r = rep.runs[i];
    if (!r.ok()) {
      monotone = false;
      continue;
    }
    const double kap = r.kappa_d.value_or(std::numeric_limits<double>::quiet_NaN());
    if (!(kap <= prev * (1.0 + 1e-9))) monotone = false;
    prev = kap;
    errs.push_back(r.rel_error);
  }
  const Summary es = summarize(errs);
  const RunRecord& lo = rep.runs[order.front()];
  const RunRecord& hi = rep.runs[order.back()];
  const double ratio = lo.kappa_d && hi.kappa_d ? *lo.kappa_d / *hi.kappa_d : std::numeric_limits<double>::quiet_NaN();
  rep.aggregates = {{"groups", group_summaries(rep.runs)},
                    {"kappa_non_increasing", monotone},
                    {"kappa_ratio_first_last", number_or_null(ratio)},
                    {"error_spread", number_or_null(es.max / es.min - 1.0)}};
  return rep;
}

/// Full lambda x alpha grid with alpha applied to all three factors and no
/// condition term. Cells are ordered lambda-major.
inline ExperimentReport run_sensitivity_sweep(const DenseMatrix& a, std::size_t k,
                                              const std::vector<double>& lambda_grid,
                                              const std::vector<double>& alpha_grid, const SolverConfig& solver,
                                              const ExecutionOptions& exec = {}) {
  if (lambda_grid.empty() || alpha_grid.empty()) throw Error(ErrorKind::InvalidArgument, "sweep grids must be non-empty");
  SolverConfig cfg = solver;
  cfg.k = k;
  cfg.validate();
  for (double l : lambda_grid)
    for (double al : alpha_grid) RegularizerConfig::uniform(l, al).validate();

  ExperimentReport rep;
  rep.kind = "sweep";
  rep.config = {{"k", k},
                {"lambdas", lambda_grid},
                {"alphas", alpha_grid},
                {"solver", to_json(cfg)},
                {"matrix", {{"rows", a.rows()}, {"cols", a.cols()}, {"frobenius_norm", frobenius_norm(a)}}}};

  const std::size_t cells = lambda_grid.size() * alpha_grid.size();
  const FactorTriple start = init_factors(a, cfg);
  std::vector<std::vector<RunRecord>> out(cells);
  detail::run_cells(cells, exec.threads, [&](std::size_t idx) {
    const double lambda = lambda_grid[idx / alpha_grid.size()];
    const double alpha = alpha_grid[idx % alpha_grid.size()];
    const std::string cell = "lambda=" + detail::format_number(lambda) + ",alpha=" + detail::format_number(alpha);
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const SolveResult s = solve_from(a, start, RegularizerConfig::uniform(lambda, alpha), cfg);
      RunRecord r = detail::solve_record(a, s, cell, cfg.seed, detail::elapsed_ms(t0));
      r.params["lambda"] = lambda;
      r.params["alpha"] = alpha;
      out[idx].push_back(std::move(r));
    } catch (const Error& e) {
      out[idx].push_back(detail::failed_record("ddecomp", cell, cfg.seed, e));
    }
  });
  rep.runs = detail::flatten(std::move(out));

  std::vector<double> errs;
  for (const auto& r : rep.runs)
    if (r.ok()) errs.push_back(r.rel_error);
  const Summary s = summarize(errs);
  rep.aggregates = {{"groups", group_summaries(rep.runs)},
                    {"cells", cells},
                    {"rel_error", to_json(s)},
                    {"max_min_ratio", number_or_null(s.max / s.min)}};
  return rep;
}

/// Repeats the solve once per seed (the seed drives the random start).
inline ExperimentReport run_stability(const DenseMatrix& a, std::size_t k, const RegularizerConfig& reg,
                                      const SolverConfig& solver, const std::vector<std::uint64_t>& seeds,
                                      const ExecutionOptions& exec = {}) {
  if (seeds.size() < 2) throw Error(ErrorKind::InvalidArgument, "stability needs at least two seeds");
  reg.validate();
  SolverConfig base = solver;
  base.k = k;
  base.validate();

  ExperimentReport rep;
  rep.kind = "stability";
  rep.config = {{"k", k},
                {"regularizer", to_json(reg)},
                {"solver", to_json(base)},
                {"seeds", seeds},
                {"matrix", {{"rows", a.rows()}, {"cols", a.cols()}, {"frobenius_norm", frobenius_norm(a)}}}};

  std::vector<std::vector<RunRecord>> out(seeds.size());
  detail::run_cells(seeds.size(), exec.threads, [&](std::size_t idx) {
    SolverConfig cfg = base;
    cfg.seed = seeds[idx];
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const SolveResult s = solve(a, reg, cfg);
      out[idx].push_back(detail::solve_record(a, s, "stability", cfg.seed, detail::elapsed_ms(t0)));
    } catch (const Error& e) {
      out[idx].push_back(detail::failed_record("ddecomp", "stability", cfg.seed, e));
    }
  });
  rep.runs = detail::flatten(std::move(out));

  std::vector<double> err, res, kap, ms;
  for (const auto& r : rep.runs) {
    if (!r.ok()) continue;
    err.push_back(r.rel_error);
    res.push_back(number_from(r.params["residual"]));
    kap.push_back(r.kappa_d.value_or(std::numeric_limits<double>::quiet_NaN()));
    ms.push_back(r.wall_ms);
  }
  const Summary es = summarize(err);
  rep.aggregates = {{"rel_error", to_json(es)},
                    {"residual", to_json(summarize(res))},
                    {"kappa_d", to_json(summarize(kap))},
                    {"wall_ms", to_json(summarize(ms))},
                    {"rel_error_std_over_mean", number_or_null(es.std / es.mean)}};
  return rep;
}

/// Times the solver on low_rank(n, k, seed) for each n, serially. The per-sweep
/// time is the median over the sweeps of that solve.
inline ExperimentReport run_runtime_scaling(const std::vector<std::size_t>& n_list, std::size_t k,
                                            const RegularizerConfig& reg, const SolverConfig& solver,
                                            bool baselines_on) {
  if (n_list.empty()) throw Error(ErrorKind::InvalidArgument, "size list is empty");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw Error(ErrorKind::InvalidArgument, "size list must be ascending");
  reg.validate();
  SolverConfig cfg = solver;
  cfg.k = k;
  cfg.validate();

  ExperimentReport rep;
  rep.kind = "scaling";
  rep.config = {{"n", n_list},
                {"k", k},
                {"regularizer", to_json(reg)},
                {"solver", to_json(cfg)},
                {"baselines", baselines_on},
                {"oversample", 10},
                {"power_iters", 2}};

  std::vector<double> ns, per_iter;
  for (std::size_t n : n_list) {
    const std::string cell = "n=" + std::to_string(n);
    DenseMatrix a;
    try {
      a = gen_low_rank(n, k, cfg.seed);
    } catch (const Error& e) {
      rep.runs.push_back(detail::failed_record("ddecomp", cell, cfg.seed, e));
      continue;
    }
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const SolveResult s = solve(a, reg, cfg);
      RunRecord r = detail::solve_record(a, s, cell, cfg.seed, detail::elapsed_ms(t0));
      const double sweep = detail::median_sweep_ms(s.trace);
      r.params["n"] = n;
      r.params["ms_per_iter"] = number_or_null(sweep);
      rep.runs.push_back(std::move(r));
      ns.push_back(static_cast<double>(n));
      per_iter.push_back(sweep);
    } catch (const Error& e) {
      rep.runs.push_back(detail::failed_record("ddecomp", cell, cfg.seed, e));
    }
    if (baselines_on) {
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const LowRankApprox approx = randomized_svd(a, k, 10, 2, cfg.seed);
        RunRecord r = detail::baseline_record(a, approx, cell, cfg.seed, detail::elapsed_ms(t0));
        r.params["n"] = n;
        rep.runs.push_back(std::move(r));
      } catch (const Error& e) {
        rep.runs.push_back(detail::failed_record("randomized_svd", cell, cfg.seed, e));
      }
    }
  }
  const auto slope = loglog_slope(ns, per_iter);
  rep.aggregates = {{"groups", group_summaries(rep.runs)}, {"ms_per_iter_slope", slope ? json(*slope) : json(nullptr)}};
  return rep;
}

}  // namespace ddq
