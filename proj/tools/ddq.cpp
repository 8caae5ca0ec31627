// ddq: command-line front end for the D-decomposition library.
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 numerical, 5 I/O.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddq/baselines.hpp"
#include "ddq/ddecomp.hpp"
#include "ddq/error.hpp"
#include "ddq/experiments.hpp"
#include "ddq/generators.hpp"
#include "ddq/io.hpp"
#include "ddq/metrics.hpp"
#include "ddq/regularizers.hpp"
#include "ddq/report.hpp"

namespace {

using namespace ddq;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitIo = 5;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string input;
  std::string gen;
  std::string out;
  std::optional<std::size_t> rank;
  std::optional<double> lambda, alpha, alpha1, alpha2, alpha3, beta, kappa_cap, tol;
  std::optional<std::size_t> max_iters;
  std::optional<std::string> d_update, init, stop;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_seeds;

  // command-specific
  bool normalize = false;
  bool baselines = false;
  std::vector<std::string> classes;
  std::optional<std::size_t> n;
  std::vector<double> eps, betas, lambdas, alphas;
  std::vector<std::size_t> sizes;
};

void add_solver_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "config file (flags override it)");
  cmd->add_option("--rank,-k", o.rank, "target rank k");
  cmd->add_option("--lambda", o.lambda, "global regularization weight");
  cmd->add_option("--alpha", o.alpha, "sets alpha1 = alpha2 = alpha3");
  cmd->add_option("--alpha1", o.alpha1, "weight on |P|_F^2");
  cmd->add_option("--alpha2", o.alpha2, "weight on |D|_F^2");
  cmd->add_option("--alpha3", o.alpha3, "weight on |Q|_F^2");
  cmd->add_option("--beta", o.beta, "weight on log kappa(D)");
  cmd->add_option("--kappa-cap", o.kappa_cap, "cap on kappa(D) when beta > 0");
  cmd->add_option("--tol", o.tol, "stopping tolerance on the residual change");
  cmd->add_option("--max-iters", o.max_iters, "maximum sweeps");
  cmd->add_option("--d-update", o.d_update, "stationary | closed")->check(CLI::IsMember({"stationary", "closed"}));
  cmd->add_option("--init", o.init, "random | svd")->check(CLI::IsMember({"random", "svd"}));
  cmd->add_option("--stop", o.stop, "absolute | relative")->check(CLI::IsMember({"absolute", "relative"}));
  cmd->add_option("--seed", o.seed, "seed for every random draw");
  cmd->add_option("--out,-o", o.out, "output path");
}

void add_matrix_source(CLI::App* cmd, Options& o) {
  auto* in = cmd->add_option("--input,-i", o.input, "matrix file (MatrixMarket or CSV)");
  auto* gen = cmd->add_option("--gen", o.gen, "generator spec, e.g. low_rank:n=200,k=20,seed=1");
  in->excludes(gen);
}

std::optional<ConfigFile> load_config(const Options& o) {
  if (o.config.empty()) return std::nullopt;
  return ConfigFile::load(o.config);
}

template <class T>
T pick(const std::optional<T>& flag, const std::optional<T>& file, T fallback) {
  if (flag) return *flag;
  if (file) return *file;
  return fallback;
}

RegularizerConfig resolve_regularizer(const Options& o, const std::optional<ConfigFile>& cfg) {
  auto file_real = [&](const char* key) -> std::optional<double> {
    return cfg ? cfg->get_real("regularizer", key) : std::nullopt;
  };
  RegularizerConfig r;
  r.lambda = pick(o.lambda, file_real("lambda"), 3e-4);
  const double alpha = pick(o.alpha, file_real("alpha"), 1e-3);
  r.alpha1 = pick(o.alpha1, file_real("alpha1"), alpha);
  r.alpha2 = pick(o.alpha2, file_real("alpha2"), alpha);
  r.alpha3 = pick(o.alpha3, file_real("alpha3"), alpha);
  r.beta = pick(o.beta, file_real("beta"), 0.0);
  if (o.kappa_cap)
    r.kappa_cap = o.kappa_cap;
  else if (auto c = file_real("kappa_cap"))
    r.kappa_cap = c;
  r.validate();
  return r;
}

std::optional<std::uint64_t> resolve_seed(const Options& o, const std::optional<ConfigFile>& cfg) {
  if (o.seed) return o.seed;
  if (cfg) return cfg->get_uint("solver", "seed");
  return std::nullopt;
}

std::optional<std::size_t> file_size(const std::optional<ConfigFile>& cfg, const char* section, const char* key) {
  if (!cfg) return std::nullopt;
  if (auto v = cfg->get_uint(section, key)) return static_cast<std::size_t>(*v);
  return std::nullopt;
}

SolverConfig resolve_solver(const Options& o, const std::optional<ConfigFile>& cfg, std::size_t default_rank,
                            std::string_view default_init) {
  auto file_str = [&](const char* key) -> std::optional<std::string> {
    return cfg ? cfg->get_string("solver", key) : std::nullopt;
  };
  SolverConfig s;
  s.k = pick(o.rank, file_size(cfg, "solver", "rank"), default_rank);
  s.tol = pick(o.tol, cfg ? cfg->get_real("solver", "tol") : std::nullopt, 1e-8);
  s.max_iters = pick(o.max_iters, file_size(cfg, "solver", "max_iters"), std::size_t{500});

  const std::string d = pick(o.d_update, file_str("d_update"), std::string("stationary"));
  if (d == "stationary")
    s.d_update = DUpdate::stationary;
  else if (d == "closed")
    s.d_update = DUpdate::closed_form;
  else
    throw UsageError("d_update must be stationary or closed, got '" + d + "'");

  const std::string init = pick(o.init, file_str("init"), std::string(default_init));
  if (init == "random")
    s.init = InitStrategy::random_gaussian;
  else if (init == "svd")
    s.init = InitStrategy::svd_warm_start;
  else
    throw UsageError("init must be random or svd, got '" + init + "'");

  const std::string stop = pick(o.stop, file_str("stop"), std::string("absolute"));
  if (stop == "absolute")
    s.stop = StopRule::absolute;
  else if (stop == "relative")
    s.stop = StopRule::relative;
  else
    throw UsageError("stop must be absolute or relative, got '" + stop + "'");

  s.seed = resolve_seed(o, cfg).value_or(0);
  s.validate();
  return s;
}

std::string resolve_out(const Options& o, const std::optional<ConfigFile>& cfg) {
  if (!o.out.empty()) return o.out;
  if (cfg)
    if (auto p = cfg->get_string("output", "path")) return *p;
  throw UsageError("--out is required");
}

// --gen specs without seed= take the explicit --seed; a random source with
// neither is a usage error.
DenseMatrix resolve_matrix(const Options& o, const std::optional<ConfigFile>& cfg) {
  std::string input = o.input, gen = o.gen;
  if (input.empty() && gen.empty() && cfg) {
    input = cfg->get_string("matrix", "input").value_or("");
    gen = cfg->get_string("matrix", "gen").value_or("");
  }
  if (!input.empty() && !gen.empty()) throw UsageError("give exactly one of --input and --gen");
  if (!input.empty()) return read_matrix(input);
  if (gen.empty()) throw UsageError("a matrix source is required: --input PATH or --gen SPEC");
  GeneratorSpec spec = parse_generator_spec(gen);
  const bool has_seed = gen.find("seed=") != std::string::npos;
  if (spec.kind != GeneratorKind::worked_example && !has_seed) {
    const auto seed = resolve_seed(o, cfg);
    if (!seed) throw UsageError("generator '" + gen + "' needs an explicit seed (seed= in the spec or --seed)");
    spec.seed = *seed;
  }
  return generate(spec);
}

std::vector<std::uint64_t> resolve_seeds(const Options& o, const std::optional<ConfigFile>& cfg, const char* section,
                                         std::size_t default_count) {
  if (!o.seed && cfg)
    if (auto list = cfg->get_uint_list(section, "seeds")) return *list;
  const auto base = resolve_seed(o, cfg);
  if (!base) throw UsageError("this command needs an explicit --seed");
  std::size_t count = default_count;
  if (o.n_seeds)
    count = *o.n_seeds;
  else if (cfg)
    if (auto c = cfg->get_uint(section, "n_seeds")) count = *c;
  if (count < 1) throw UsageError("--n-seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < count; ++i) seeds.push_back(*base + i);
  return seeds;
}

template <class T>
std::vector<T> list_or(const std::vector<T>& flag, const std::optional<std::vector<T>>& file, std::vector<T> fallback) {
  if (!flag.empty()) return flag;
  if (file) return *file;
  return fallback;
}

std::optional<std::vector<double>> file_reals(const std::optional<ConfigFile>& cfg, const char* s, const char* k) {
  return cfg ? cfg->get_real_list(s, k) : std::nullopt;
}

void report_written(const std::string& path, const ExperimentReport& rep) {
  std::size_t failed = 0;
  for (const auto& r : rep.runs) failed += r.ok() ? 0 : 1;
  std::cout << rep.kind << ": " << rep.runs.size() << " runs (" << failed << " failed) -> " << path << "\n";
}

int cmd_decompose(const Options& o) {
  const auto cfg = load_config(o);
  const DenseMatrix a = resolve_matrix(o, cfg);
  const RegularizerConfig reg = resolve_regularizer(o, cfg);
  if (!o.rank && !(cfg && cfg->has("solver", "rank"))) throw UsageError("decompose needs --rank");
  const SolverConfig s = resolve_solver(o, cfg, 1, "svd");
  if (s.init == InitStrategy::random_gaussian && !resolve_seed(o, cfg))
    throw UsageError("random initialization needs an explicit --seed");
  const std::string out = resolve_out(o, cfg);

  const SolveResult res = solve(a, reg, s);
  write_factors(out, res.factors, o.normalize);

  ExperimentReport trace;
  trace.kind = "decompose";
  trace.config = {{"regularizer", to_json(reg)},
                  {"solver", to_json(s)},
                  {"matrix", {{"rows", a.rows()}, {"cols", a.cols()}}},
                  {"source", o.input.empty() ? json(o.gen) : json(o.input)}};
  RunRecord r;
  r.method = "ddecomp";
  r.cell = "decompose";
  r.seed = s.seed;
  r.rel_error = relative_frobenius_error(a, res.factors.product());
  r.kappa_d = res.trace.final_record().kappa_d;
  r.iters = res.trace.iterations();
  double total = 0.0;
  json records = json::array();
  for (const auto& it : res.trace.records) {
    total += it.wall_ms;
    records.push_back({{"iteration", it.iteration},
                       {"objective", number_or_null(it.objective)},
                       {"residual", number_or_null(it.residual)},
                       {"kappa_d", number_or_null(it.kappa_d)},
                       {"wall_ms", number_or_null(it.wall_ms)}});
  }
  r.wall_ms = total;
  r.params["status"] = std::string(to_string(res.trace.status));
  trace.runs.push_back(r);
  trace.aggregates = {{"trace", std::move(records)}};
  write_report(out + ".trace.json", trace);

  std::cout << "rank " << s.k << ", " << r.iters << " sweeps (" << to_string(res.trace.status)
            << "), rel_error " << r.rel_error << ", kappa(D) " << *r.kappa_d << "\n";
  return 0;
}

int cmd_generate(const Options& o) {
  const auto cfg = load_config(o);
  const DenseMatrix a = resolve_matrix(o, cfg);
  const std::string out = resolve_out(o, cfg);
  write_matrix(out, a);
  std::cout << a.shape_string() << " -> " << out << "\n";
  return 0;
}

int cmd_benchmark(const Options& o) {
  const auto cfg = load_config(o);
  const RegularizerConfig reg = resolve_regularizer(o, cfg);
  const SolverConfig s = resolve_solver(o, cfg, 50, "svd");
  const auto seeds = resolve_seeds(o, cfg, "benchmark", 5);
  const std::string out = resolve_out(o, cfg);
  const std::size_t n = o.n ? *o.n : (cfg ? cfg->get_uint("benchmark", "n").value_or(500) : 500);
  const auto names = list_or(o.classes, cfg ? cfg->get_string_list("benchmark", "classes") : std::nullopt,
                             {"low_rank", "noisy_sparse", "ill_conditioned"});
  std::vector<GeneratorSpec> classes;
  for (const auto& name : names) {
    GeneratorSpec spec;
    spec.kind = parse_generator_kind(name);
    spec.n = n;
    spec.k = s.k;
    if (cfg) {
      spec.density = cfg->get_real("benchmark", "density").value_or(spec.density);
      spec.sigma_noise = cfg->get_real("benchmark", "sigma_noise").value_or(spec.sigma_noise);
      spec.eps = cfg->get_real("benchmark", "eps").value_or(spec.eps);
    }
    classes.push_back(spec);
  }
  const auto rep = run_benchmark(classes, s.k, reg, s, seeds, {threads_from_env()});
  write_report(out, rep);
  report_written(out, rep);
  return 0;
}

int cmd_perturb(const Options& o) {
  const auto cfg = load_config(o);
  const RegularizerConfig reg = resolve_regularizer(o, cfg);
  const SolverConfig s = resolve_solver(o, cfg, 20, "svd");
  const auto seeds = resolve_seeds(o, cfg, "perturb", 1);
  const std::string out = resolve_out(o, cfg);
  const std::size_t n = o.n ? *o.n : (cfg ? cfg->get_uint("perturb", "n").value_or(200) : 200);
  const auto eps = list_or(o.eps, file_reals(cfg, "perturb", "eps"), {1e-4, 1e-3, 1e-2});
  const auto rep = run_perturbation_study(n, s.k, eps, reg, s, seeds, {threads_from_env()});
  write_report(out, rep);
  report_written(out, rep);
  return 0;
}

int cmd_ablate(const Options& o) {
  const auto cfg = load_config(o);
  const DenseMatrix a = resolve_matrix(o, cfg);
  const RegularizerConfig reg = resolve_regularizer(o, cfg);
  const SolverConfig s = resolve_solver(o, cfg, 20, "svd");
  const std::string out = resolve_out(o, cfg);
  const auto betas = list_or(o.betas, file_reals(cfg, "ablate", "betas"), {0.0, 1e-3, 1e-2, 1e-1});
  const auto rep = run_ablation_beta(a, s.k, betas, reg, s, {threads_from_env()});
  write_report(out, rep);
  report_written(out, rep);
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto cfg = load_config(o);
  const DenseMatrix a = resolve_matrix(o, cfg);
  const SolverConfig s = resolve_solver(o, cfg, 20, "svd");
  const std::string out = resolve_out(o, cfg);
  const auto lambdas =
      list_or(o.lambdas, file_reals(cfg, "sweep", "lambdas"), {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1});
  const auto alphas = list_or(o.alphas, file_reals(cfg, "sweep", "alphas"), {1e-4, 3e-4, 1e-3, 3e-3, 1e-2});
  const auto rep = run_sensitivity_sweep(a, s.k, lambdas, alphas, s, {threads_from_env()});
  write_report(out, rep);
  report_written(out, rep);
  return 0;
}

int cmd_stability(const Options& o) {
  const auto cfg = load_config(o);
  const DenseMatrix a = resolve_matrix(o, cfg);
  const RegularizerConfig reg = resolve_regularizer(o, cfg);
  const SolverConfig s = resolve_solver(o, cfg, 50, "random");
  const auto seeds = resolve_seeds(o, cfg, "stability", 10);
  const std::string out = resolve_out(o, cfg);
  const auto rep = run_stability(a, s.k, reg, s, seeds, {threads_from_env()});
  write_report(out, rep);
  report_written(out, rep);
  return 0;
}

int cmd_scaling(const Options& o) {
  const auto cfg = load_config(o);
  const RegularizerConfig reg = resolve_regularizer(o, cfg);
  SolverConfig s = resolve_solver(o, cfg, 50, "random");
  if (!resolve_seed(o, cfg)) throw UsageError("scaling needs an explicit --seed");
  const std::string out = resolve_out(o, cfg);
  std::vector<std::size_t> sizes = o.sizes;
  if (sizes.empty() && cfg)
    if (auto l = cfg->get_uint_list("scaling", "sizes"))
      for (auto v : *l) sizes.push_back(static_cast<std::size_t>(v));
  if (sizes.empty()) sizes = {500, 1000, 2000};
  const bool baselines = o.baselines || (cfg && cfg->get_bool("scaling", "baselines").value_or(false));
  const auto rep = run_runtime_scaling(sizes, s.k, reg, s, baselines);
  write_report(out, rep);
  report_written(out, rep);
  return 0;
}

int exit_code_for(const Error& e) {
  if (e.kind() == ErrorKind::InvalidArgument) return kExitUsage;
  switch (e.category()) {
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Numerical: return kExitNumerical;
    case ErrorCategory::Io: return kExitIo;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D-decomposition A ~ PDQ: solver, baselines and experiments"};
  app.require_subcommand(1);
  Options o;

  auto* decompose = app.add_subcommand("decompose", "factor a matrix; writes OUT.P/.D/.Q, manifest and trace");
  add_matrix_source(decompose, o);
  add_solver_options(decompose, o);
  decompose->add_flag("--normalize", o.normalize, "gauge-normalize the factors before writing");

  auto* generate_cmd = app.add_subcommand("generate", "write a generated matrix (format from the extension)");
  add_matrix_source(generate_cmd, o);
  generate_cmd->add_option("--seed", o.seed, "seed when the spec has none");
  generate_cmd->add_option("--config", o.config, "config file");
  generate_cmd->add_option("--out,-o", o.out, "output path");

  auto* benchmark = app.add_subcommand("benchmark", "all methods on the synthetic classes");
  add_solver_options(benchmark, o);
  benchmark->add_option("--classes", o.classes, "generator kinds")->delimiter(',');
  benchmark->add_option("--n", o.n, "matrix size");
  benchmark->add_option("--n-seeds", o.n_seeds, "seeds --seed .. --seed + N - 1");

  auto* perturb = app.add_subcommand("perturb", "|D* - D0|_F against the perturbation size");
  add_solver_options(perturb, o);
  perturb->add_option("--n", o.n, "matrix size");
  perturb->add_option("--eps", o.eps, "perturbation sizes, ascending")->delimiter(',');
  perturb->add_option("--n-seeds", o.n_seeds, "number of seeds");

  auto* ablate = app.add_subcommand("ablate", "solve once per beta");
  add_matrix_source(ablate, o);
  add_solver_options(ablate, o);
  ablate->add_option("--betas", o.betas, "beta grid, must include 0")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "lambda x alpha grid");
  add_matrix_source(sweep, o);
  add_solver_options(sweep, o);
  sweep->add_option("--lambdas", o.lambdas, "lambda grid")->delimiter(',');
  sweep->add_option("--alphas", o.alphas, "alpha grid")->delimiter(',');

  auto* stability = app.add_subcommand("stability", "repeat the solve over seeds");
  add_matrix_source(stability, o);
  add_solver_options(stability, o);
  stability->add_option("--n-seeds", o.n_seeds, "number of seeds");

  auto* scaling = app.add_subcommand("scaling", "per-sweep time against n");
  add_solver_options(scaling, o);
  scaling->add_option("--sizes", o.sizes, "ascending sizes")->delimiter(',');
  scaling->add_flag("--baselines", o.baselines, "also time randomized SVD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*decompose) return cmd_decompose(o);
    if (*generate_cmd) return cmd_generate(o);
    if (*benchmark) return cmd_benchmark(o);
    if (*perturb) return cmd_perturb(o);
    if (*ablate) return cmd_ablate(o);
    if (*sweep) return cmd_sweep(o);
    if (*stability) return cmd_stability(o);
    if (*scaling) return cmd_scaling(o);
  } catch (const UsageError& e) {
    std::cerr << "ddq: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "ddq: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}
