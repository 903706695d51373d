/// @file
/// @brief Command-line front end: solve, check, generate, evaluate, oracle.
///
/// Exit codes: 0 success, 1 infeasible or empty result, 2 bad input or I/O,
/// 3 solver did not converge (plan and report are still written).

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "scotm/io.hpp"
#include "scotm/scotm.hpp"

namespace {

using namespace scotm;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitInput = 2;
constexpr int kExitNotConverged = 3;

int exit_code_for(ErrorCode c) {
  switch (c) {
  case ErrorCode::InfeasibleInstance:
  case ErrorCode::InitInfeasible:
  case ErrorCode::PriorityConstructionInfeasible:
  case ErrorCode::RestrictedInfeasible:
  case ErrorCode::CombinatorialBlowup:
  case ErrorCode::EmptyPlan:
  case ErrorCode::EmptyTruth:
  case ErrorCode::NoPrioritizedPoints:
    return kExitInfeasible;
  default:
    return kExitInput;
  }
}

// Options shared by solve and oracle.
struct ProblemArgs {
  std::string cost, a, b;
  std::size_t rho_s = 0, rho_t = 0;
  CLI::Option *rho_s_opt = nullptr, *rho_t_opt = nullptr;
};

void add_problem_options(CLI::App *app, ProblemArgs &p) {
  app->add_option("--cost", p.cost, "cost matrix CSV")->required();
  app->add_option("--a", p.a, "source marginal (one value per line)")->required();
  app->add_option("--b", p.b, "target marginal (one value per line)")->required();
  p.rho_s_opt = app->add_option("--rho-s", p.rho_s, "non-zeros allowed per row");
  p.rho_t_opt = app->add_option("--rho-t", p.rho_t, "non-zeros allowed per column");
}

// Solver settings: defaults, then the config file, then SCOTM_SEED, then
// explicit flags.
struct SolverArgs {
  std::string config;
  SolverConfig cfg;
  std::vector<std::pair<CLI::Option *, std::function<void()>>> flags;
  double gamma = 0, q = 0, sigma0 = 0, theta = 0, eps_base = 0, eps_scale = 0,
         outer_tol = 0, zero_tol = 0;
  int max_outer = 0, max_inner = 0;
  std::uint64_t seed = 0;
  bool no_polish = false;
};

template <typename T>
void bind(CLI::App *app, SolverArgs &s, const std::string &name, T &slot, T &target,
          const std::string &help) {
  CLI::Option *o = app->add_option(name, slot, help);
  s.flags.emplace_back(o, [&slot, &target] { target = slot; });
}

void add_solver_options(CLI::App *app, SolverArgs &s) {
  app->add_option("--config", s.config, "JSON file with solver settings");
  bind(app, s, "--gamma", s.gamma, s.cfg.gamma, "entropy weight");
  bind(app, s, "--q", s.q, s.cfg.q, "entropy deformation in [0, 1)");
  bind(app, s, "--sigma0", s.sigma0, s.cfg.sigma0, "initial penalty");
  bind(app, s, "--theta", s.theta, s.cfg.theta, "penalty growth factor");
  bind(app, s, "--eps-base", s.eps_base, s.cfg.eps_base, "inner tolerance decay");
  bind(app, s, "--eps-scale", s.eps_scale, s.cfg.eps_scale, "inner tolerance scale");
  bind(app, s, "--outer-tol", s.outer_tol, s.cfg.outer_tol, "outer stopping tolerance");
  bind(app, s, "--max-outer", s.max_outer, s.cfg.max_outer, "outer iteration cap");
  bind(app, s, "--max-inner", s.max_inner, s.cfg.max_inner, "inner iteration cap");
  bind(app, s, "--zero-tol", s.zero_tol, s.cfg.zero_tol, "entries above this count as non-zero");
  bind(app, s, "--seed", s.seed, s.cfg.seed, "random seed");
  CLI::Option *np = app->add_flag("--no-polish", s.no_polish,
                                  "skip the final re-optimization on the support");
  s.flags.emplace_back(np, [&s] { s.cfg.polish = !s.no_polish; });
}

template <typename T> void take(const json &j, const char *key, T &out) {
  if (j.contains(key))
    out = j.at(key).get<T>();
}

void apply_config_file(const std::string &path, SolverConfig &c, ProblemArgs *p) {
  const json j = io::read_json(path);
  try {
    take(j, "gamma", c.gamma);
    take(j, "q", c.q);
    take(j, "sigma0", c.sigma0);
    take(j, "theta", c.theta);
    take(j, "eps_base", c.eps_base);
    take(j, "eps_scale", c.eps_scale);
    take(j, "outer_tol", c.outer_tol);
    take(j, "max_outer", c.max_outer);
    take(j, "max_inner", c.max_inner);
    take(j, "zero_tol", c.zero_tol);
    take(j, "polish", c.polish);
    take(j, "polish_iters", c.polish_iters);
    take(j, "seed", c.seed);
    if (j.contains("armijo")) {
      const json &a = j.at("armijo");
      take(a, "init_step", c.armijo.init_step);
      take(a, "shrink", c.armijo.shrink);
      take(a, "c1", c.armijo.c1);
      take(a, "max_backtracks", c.armijo.max_backtracks);
    }
    if (p) {
      if (!p->rho_s_opt->count())
        take(j, "rho_s", p->rho_s);
      if (!p->rho_t_opt->count())
        take(j, "rho_t", p->rho_t);
    }
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
}

std::uint64_t parse_seed_env(const char *text) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(text, &pos);
    if (pos == std::string(text).size())
      return v;
  } catch (const std::exception &) {
  }
  throw Error(ErrorCode::InvalidConfig, std::string("SCOTM_SEED is not an unsigned integer: ") + text);
}

SolverConfig resolve_config(SolverArgs &s, ProblemArgs *p) {
  if (!s.config.empty())
    apply_config_file(s.config, s.cfg, p);
  if (const char *env = std::getenv("SCOTM_SEED"))
    s.cfg.seed = parse_seed_env(env);
  for (auto &[opt, apply] : s.flags)
    if (opt->count())
      apply();
  s.cfg.check();
  return s.cfg;
}

ValidatedInstance load_instance(const ProblemArgs &p) {
  if (p.rho_s == 0 || p.rho_t == 0)
    throw Error(ErrorCode::InvalidConfig, "--rho-s and --rho-t are required");
  const Matrix C = io::read_matrix(p.cost);
  Vector a = io::read_vector(p.a), b = io::read_vector(p.b);
  return validate_instance(CostMatrix(C), Marginals(std::move(a), std::move(b)),
                           BudgetSpec{p.rho_s, p.rho_t});
}

// ---------------------------------------------------------------------------

struct SolveCmd {
  ProblemArgs prob;
  SolverArgs solver;
  std::string out, triplets, report;
  bool timing = false;
};

int run_solve(SolveCmd &c) {
  const SolverConfig cfg = resolve_config(c.solver, &c.prob);
  const ValidatedInstance inst = load_instance(c.prob);
  const SolverReport r = solve(inst, cfg);
  const Matrix &T = r.final_plan.values();
  if (!c.out.empty())
    io::write_matrix(c.out, T);
  if (!c.triplets.empty())
    io::write_triplets(c.triplets, T, cfg.zero_tol);
  const auto rep = io::report_to_json(r, cfg, inst.budget(), c.timing);
  if (!c.report.empty())
    io::write_json(c.report, rep);
  std::cout << "G=" << io::format_double(r.objective_G)
            << " residual=" << io::format_double(r.residual)
            << " outer=" << r.outer_iters << " inner=" << r.total_inner_iters
            << " density=" << io::format_double(density_percent(T, cfg.zero_tol))
            << (r.converged ? "" : " (not converged)") << "\n";
  return r.converged ? kExitOk : kExitNotConverged;
}

struct CheckCmd {
  std::string a, b, prioritized, prioritized_cols;
  std::size_t rho_s = 0, rho_t = 0, h = 1;
};

int run_check(const CheckCmd &c) {
  const Marginals ab(io::read_vector(c.a), io::read_vector(c.b));
  const BudgetSpec budget{c.rho_s, c.rho_t};
  const auto ne = check_nonemptiness(ab, budget);
  auto verdict = [](bool ok) { return ok ? "pass" : "fail"; };
  bool all = ne.ok();
  std::cout << "row capacity: |a|_inf=" << io::format_double(ne.a_max)
            << " <= sum of rho_s-1 smallest b=" << io::format_double(ne.row_bound)
            << " " << verdict(ne.row_ok) << "\n";
  std::cout << "column capacity: |b|_inf=" << io::format_double(ne.b_max)
            << " <= sum of rho_t-1 smallest a=" << io::format_double(ne.col_bound)
            << " " << verdict(ne.col_ok) << "\n";
  auto report = [&](const char *label, const PriorityCheck &pc) {
    std::cout << label << ": min prioritized mass=" << io::format_double(pc.weakest)
              << " >= sum of h largest on the other side="
              << io::format_double(pc.required) << " " << verdict(pc.ok());
    if (!pc.ok()) {
      std::cout << " (failing:";
      for (std::size_t i : pc.failing)
        std::cout << " " << i;
      std::cout << ")";
    }
    std::cout << "\n";
    all = all && pc.ok();
  };
  if (!c.prioritized.empty())
    report("row priority", check_priority_rows(ab, budget, {io::read_indices(c.prioritized), c.h}));
  if (!c.prioritized_cols.empty())
    report("column priority",
           check_priority_cols(ab, budget, {io::read_indices(c.prioritized_cols), c.h}));
  return all ? kExitOk : kExitInfeasible;
}

struct GenerateCmd {
  std::string kind, out_dir = ".";
  std::size_t m = 0, n = 0, rho_s = 9, rho_t = 5, h = 1;
  double r = 0.1;
  std::uint64_t seed = 0;
  CLI::Option *seed_opt = nullptr;
};

int run_generate(GenerateCmd &c) {
  std::uint64_t seed = c.seed;
  if (!c.seed_opt->count()) {
    const char *env = std::getenv("SCOTM_SEED");
    if (!env)
      throw Error(ErrorCode::InvalidConfig, "--seed (or SCOTM_SEED) is required");
    seed = parse_seed_env(env);
  }
  io::Instance inst;
  if (c.kind == "gaussian2") {
    inst = io::generate_gaussian2(c.m ? c.m : 30, c.n ? c.n : 30, seed);
  } else if (c.kind == "tasks") {
    const std::size_t n = c.n ? c.n : (c.m ? c.m : 32);
    const std::size_t m = c.m ? c.m : n;
    inst = io::generate_tasks(m, n, {c.rho_s, c.rho_t}, c.r, c.h, seed);
  } else {
    inst = io::generate_ranks(c.m ? c.m : 5, c.n ? c.n : 4, seed);
  }
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec)
    throw Error(ErrorCode::Io, "cannot create " + c.out_dir + ": " + ec.message());
  const std::filesystem::path dir(c.out_dir);
  io::write_matrix((dir / "cost.csv").string(), inst.cost);
  io::write_vector((dir / "a.csv").string(), inst.a);
  io::write_vector((dir / "b.csv").string(), inst.b);
  if (c.kind == "tasks")
    io::write_indices((dir / "prioritized.csv").string(), inst.prioritized);
  if (c.kind == "ranks")
    io::write_ranks((dir / "ranks.csv").string(), inst.ranks);
  std::cout << "wrote " << c.kind << " " << inst.cost.rows() << "x"
            << inst.cost.cols() << " to " << c.out_dir << "\n";
  return kExitOk;
}

struct EvaluateCmd {
  std::string plan, prioritized, ranks, truth, out;
  std::size_t rho_s = 0, cap = 0;
  int k = 1;
  double zero_tol = 1e-9;
};

int run_evaluate(const EvaluateCmd &c) {
  const Matrix T = io::read_matrix(c.plan);
  nlohmann::ordered_json j;
  j["density_percent"] = density_percent(T, c.zero_tol);
  if (!c.prioritized.empty()) {
    const auto prio = io::read_indices(c.prioritized);
    j["pppm"] = pppm(T, prio, c.zero_tol);
    if (c.rho_s > 0)
      j["psmbpp"] = psmbpp(T, prio, BudgetSpec{c.rho_s, 1}, c.zero_tol);
  }
  if (!c.ranks.empty()) {
    const std::size_t cap = c.cap ? c.cap : (c.rho_s ? c.rho_s : T.cols());
    j["topk"] = {{"k", c.k}, {"cap", cap},
                 {"percent", topk_coverage(T, io::read_ranks(c.ranks), c.k, cap, c.zero_tol)}};
  }
  if (!c.truth.empty()) {
    const PrecisionRecall pr = precision_recall_f1(T, io::read_pairs(c.truth), c.zero_tol);
    j["precision"] = pr.precision;
    j["recall"] = pr.recall;
    j["f1"] = pr.f1;
  } else if (nnz(T, c.zero_tol) == 0) {
    throw Error(ErrorCode::EmptyPlan, "plan has no non-zero entry");
  }
  if (c.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    io::write_json(c.out, j);
  return kExitOk;
}

struct OracleCmd {
  ProblemArgs prob;
  double gamma = 0.1, q = 0.9;
  std::string out;
};

int run_oracle(const OracleCmd &c) {
  const ValidatedInstance inst = load_instance(c.prob);
  const ObjectiveParams p{c.gamma, c.q};
  const OracleResult r =
      global_oracle(inst.cost().values(), inst.marginals(), inst.budget(), p);
  if (!c.out.empty())
    io::write_matrix(c.out, r.plan.values());
  std::cout << "G=" << io::format_double(r.G) << " support=";
  for (char v : r.mask)
    std::cout << (v ? '1' : '0');
  std::cout << "\n";
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sparse transport plans with per-point matching budgets"};
  // -h is taken by the guaranteed-partner count.
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  SolveCmd solve_c;
  CLI::App *sc = app.add_subcommand("solve", "run the penalty solver");
  add_problem_options(sc, solve_c.prob);
  add_solver_options(sc, solve_c.solver);
  sc->add_option("--out", solve_c.out, "dense plan CSV");
  sc->add_option("--triplets", solve_c.triplets, "sparse plan CSV (i,j,value)");
  sc->add_option("--report", solve_c.report, "JSON report");
  sc->add_flag("--include-timing", solve_c.timing, "add wall_time to the report");

  CheckCmd check_c;
  CLI::App *cc = app.add_subcommand("check", "test the feasibility and priority conditions");
  cc->add_option("--a", check_c.a)->required();
  cc->add_option("--b", check_c.b)->required();
  cc->add_option("--rho-s", check_c.rho_s)->required();
  cc->add_option("--rho-t", check_c.rho_t)->required();
  cc->add_option("--prioritized", check_c.prioritized, "prioritized row indices");
  cc->add_option("--prioritized-cols", check_c.prioritized_cols, "prioritized column indices");
  cc->add_option("--h", check_c.h, "guaranteed partners per prioritized point");

  GenerateCmd gen_c;
  CLI::App *gc = app.add_subcommand("generate", "write a seeded synthetic instance");
  gc->add_option("kind", gen_c.kind)
      ->required()
      ->check(CLI::IsMember({"gaussian2", "tasks", "ranks"}));
  gc->add_option("--m", gen_c.m);
  gc->add_option("--n", gen_c.n);
  gen_c.seed_opt = gc->add_option("--seed", gen_c.seed);
  gc->add_option("--rho-s", gen_c.rho_s);
  gc->add_option("--rho-t", gen_c.rho_t);
  gc->add_option("--r", gen_c.r, "fraction of prioritized rows");
  gc->add_option("--h", gen_c.h);
  gc->add_option("--out-dir", gen_c.out_dir);

  EvaluateCmd eval_c;
  CLI::App *ec = app.add_subcommand("evaluate", "metrics of a plan");
  ec->add_option("--plan", eval_c.plan)->required();
  ec->add_option("--prioritized", eval_c.prioritized);
  ec->add_option("--rho-s", eval_c.rho_s);
  ec->add_option("--ranks", eval_c.ranks);
  ec->add_option("--k", eval_c.k);
  ec->add_option("--cap", eval_c.cap, "rank-<=k slots counted per row (default rho_s)");
  ec->add_option("--truth", eval_c.truth, "true pairs, i,j per line");
  ec->add_option("--zero-tol", eval_c.zero_tol);
  ec->add_option("--out", eval_c.out);

  OracleCmd orc_c;
  CLI::App *oc = app.add_subcommand("oracle", "exhaustive optimum for tiny instances");
  add_problem_options(oc, orc_c.prob);
  oc->add_option("--gamma", orc_c.gamma);
  oc->add_option("--q", orc_c.q);
  oc->add_option("--out", orc_c.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (sc->parsed())
      return run_solve(solve_c);
    if (cc->parsed())
      return run_check(check_c);
    if (gc->parsed())
      return run_generate(gen_c);
    if (ec->parsed())
      return run_evaluate(eval_c);
    return run_oracle(orc_c);
  } catch (const Error &e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
}
