/// @file
/// @brief File formats (dense CSV, marginal columns, sparse triplets, JSON
/// reports) and seeded instance generators.
#pragma once

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "scotm/feasibility.hpp"
#include "scotm/metrics.hpp"

namespace scotm::io {

/// Shortest decimal text that reads back to the same double (17 significant
/// digits).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out)
    throw Error(ErrorCode::Io, "write failed for " + path);
}

inline double parse_double(const std::string &tok, const std::string &where) {
  // strtod rather than stod: subnormals set ERANGE but are valid values.
  const char *begin = tok.c_str();
  char *end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || (errno == ERANGE && std::isinf(v)))
    throw Error(ErrorCode::Parse, where + ": not a number: '" + tok + "'");
  std::size_t pos = static_cast<std::size_t>(end - begin);
  while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos])))
    ++pos;
  if (pos != tok.size())
    throw Error(ErrorCode::Parse, where + ": trailing text in '" + tok + "'");
  return v;
}

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Rows of comma-separated numbers; '#' lines are returned through `header`.
inline std::vector<std::vector<double>> parse_rows(const std::string &text,
                                                   const std::string &path,
                                                   std::string *header) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty())
      continue;
    if (line[0] == '#') {
      if (header && header->empty())
        *header = line;
      continue;
    }
    std::vector<double> row;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ','))
      row.push_back(parse_double(trim(tok), path + ":" + std::to_string(lineno)));
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace detail

/// Dense CSV: a `# rows=m cols=n` line, then m comma-separated rows.
inline std::string matrix_to_csv(const Matrix &M) {
  std::string s = "# rows=" + std::to_string(M.rows()) +
                  " cols=" + std::to_string(M.cols()) + "\n";
  for (std::size_t i = 0; i < M.rows(); ++i) {
    for (std::size_t j = 0; j < M.cols(); ++j) {
      if (j)
        s += ',';
      s += format_double(M(i, j));
    }
    s += '\n';
  }
  return s;
}

inline Matrix matrix_from_csv(const std::string &text, const std::string &path = "<csv>") {
  std::string header;
  const auto rows = detail::parse_rows(text, path, &header);
  if (rows.empty())
    throw Error(ErrorCode::Parse, path + ": no data rows");
  const std::size_t m = rows.size(), n = rows.front().size();
  for (const auto &r : rows)
    if (r.size() != n)
      throw Error(ErrorCode::Parse, path + ": ragged rows");
  unsigned long hm = 0, hn = 0;
  if (std::sscanf(header.c_str(), "# rows=%lu cols=%lu", &hm, &hn) == 2 &&
      (hm != m || hn != n))
    throw Error(ErrorCode::Parse, path + ": header says " + std::to_string(hm) +
                                      "x" + std::to_string(hn) + ", data is " +
                                      std::to_string(m) + "x" + std::to_string(n));
  Matrix M(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      M(i, j) = rows[i][j];
  return M;
}

inline void write_matrix(const std::string &path, const Matrix &M) {
  detail::write_text(path, matrix_to_csv(M));
}

inline Matrix read_matrix(const std::string &path) {
  return matrix_from_csv(detail::read_text(path), path);
}

/// One value per line.
inline void write_vector(const std::string &path, std::span<const double> v) {
  std::string s;
  for (double x : v)
    s += format_double(x) + "\n";
  detail::write_text(path, s);
}

inline Vector read_vector(const std::string &path) {
  const auto rows = detail::parse_rows(detail::read_text(path), path, nullptr);
  Vector v;
  for (const auto &r : rows) {
    if (r.size() != 1)
      throw Error(ErrorCode::Parse, path + ": expected one value per line");
    v.push_back(r[0]);
  }
  if (v.empty())
    throw Error(ErrorCode::Parse, path + ": no values");
  return v;
}

/// `i,j,value` for every entry above `zero_tol`.
inline void write_triplets(const std::string &path, const Matrix &M, double zero_tol) {
  std::string s = "# rows=" + std::to_string(M.rows()) +
                  " cols=" + std::to_string(M.cols()) + "\n";
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j)
      if (M(i, j) > zero_tol)
        s += std::to_string(i) + "," + std::to_string(j) + "," +
             format_double(M(i, j)) + "\n";
  detail::write_text(path, s);
}

/// Index list, one per line (prioritized rows).
inline void write_indices(const std::string &path, const std::vector<std::size_t> &idx) {
  std::string s;
  for (std::size_t i : idx)
    s += std::to_string(i) + "\n";
  detail::write_text(path, s);
}

inline std::vector<std::size_t> read_indices(const std::string &path) {
  std::vector<std::size_t> out;
  for (const auto &r : detail::parse_rows(detail::read_text(path), path, nullptr)) {
    if (r.size() != 1 || r[0] < 0.0 || r[0] != std::floor(r[0]))
      throw Error(ErrorCode::Parse, path + ": expected one index per line");
    out.push_back(static_cast<std::size_t>(r[0]));
  }
  return out;
}

inline RankMatrix read_ranks(const std::string &path) {
  const Matrix M = read_matrix(path);
  RankMatrix r(M.rows(), std::vector<int>(M.cols()));
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) {
      if (M(i, j) != std::floor(M(i, j)))
        throw Error(ErrorCode::RankOutOfRange, path + ": non-integer rank");
      r[i][j] = static_cast<int>(M(i, j));
    }
  return r;
}

inline void write_ranks(const std::string &path, const RankMatrix &r) {
  std::string s = "# rows=" + std::to_string(r.size()) +
                  " cols=" + std::to_string(r.empty() ? 0 : r[0].size()) + "\n";
  for (const auto &row : r) {
    for (std::size_t j = 0; j < row.size(); ++j)
      s += (j ? "," : "") + std::to_string(row[j]);
    s += '\n';
  }
  detail::write_text(path, s);
}

/// Pairs `i,j` per line (matching ground truth).
inline PairSet read_pairs(const std::string &path) {
  PairSet out;
  for (const auto &r : detail::parse_rows(detail::read_text(path), path, nullptr)) {
    if (r.size() < 2 || r[0] < 0.0 || r[1] < 0.0)
      throw Error(ErrorCode::Parse, path + ": expected i,j per line");
    out.emplace(static_cast<std::size_t>(r[0]), static_cast<std::size_t>(r[1]));
  }
  return out;
}

inline nlohmann::ordered_json config_to_json(const SolverConfig &c) {
  return {{"gamma", c.gamma},
          {"q", c.q},
          {"sigma0", c.sigma0},
          {"theta", c.theta},
          {"eps_base", c.eps_base},
          {"eps_scale", c.eps_scale},
          {"outer_tol", c.outer_tol},
          {"max_outer", c.max_outer},
          {"max_inner", c.max_inner},
          {"armijo",
           {{"init_step", c.armijo.init_step},
            {"shrink", c.armijo.shrink},
            {"c1", c.armijo.c1},
            {"max_backtracks", c.armijo.max_backtracks}}},
          {"zero_tol", c.zero_tol},
          {"polish", c.polish},
          {"polish_iters", c.polish_iters},
          {"seed", c.seed}};
}

/// Report fields mirroring SolverReport (the plan itself is written
/// separately). wall_time is included only on request so that repeated runs
/// produce identical files.
inline nlohmann::ordered_json report_to_json(const SolverReport &r,
                                             const SolverConfig &cfg,
                                             const BudgetSpec &budget,
                                             bool include_timing = false) {
  nlohmann::ordered_json j;
  const Matrix &T = r.final_plan.values();
  j["m"] = T.rows();
  j["n"] = T.cols();
  j["rho_s"] = budget.rho_s;
  j["rho_t"] = budget.rho_t;
  j["converged"] = r.converged;
  j["outer_iters"] = r.outer_iters;
  j["total_inner_iters"] = r.total_inner_iters;
  j["max_inner_hit"] = r.max_inner_hit;
  j["objective_G"] = r.objective_G;
  j["objective_G_snapped"] = r.objective_G_snapped;
  j["polished"] = r.polished;
  j["residual"] = r.residual;
  j["stationarity"] = r.stationarity;
  j["snap_distance"] = r.snap_distance;
  j["max_marginal_violation"] = r.max_marginal_violation;
  j["nnz"] = nnz(T, cfg.zero_tol);
  j["density_percent"] = density_percent(T, cfg.zero_tol);
  auto &outer = j["per_outer"] = nlohmann::ordered_json::array();
  for (const OuterRecord &o : r.per_outer)
    outer.push_back({{"sigma", o.sigma},
                     {"inner_iters", o.inner_iters},
                     {"J_value", o.J_value},
                     {"residual", o.residual},
                     {"warm_start_kept", o.warm_start_kept},
                     {"hit_max_inner", o.hit_max_inner}});
  j["config"] = config_to_json(cfg);
  if (include_timing)
    j["wall_time"] = r.wall_time;
  return j;
}

inline void write_json(const std::string &path, const nlohmann::ordered_json &j) {
  detail::write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::string &path) {
  try {
    return nlohmann::json::parse(detail::read_text(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Generators

struct Instance {
  Matrix cost;
  Vector a, b;
  std::vector<std::size_t> prioritized; ///< tasks generator only
  RankMatrix ranks;                     ///< ranks generator only
};

/// Two point clouds drawn from 0.5 N([0,0], I) + 0.5 N([2,2], I), squared
/// Euclidean cost divided by its largest entry, uniform marginals.
inline Instance generate_gaussian2(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0)
    throw Error(ErrorCode::DimensionMismatch, "empty instance");
  std::mt19937_64 g(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::bernoulli_distribution B(0.5);
  auto cloud = [&](std::size_t k) {
    std::vector<std::array<double, 2>> p(k);
    for (auto &x : p) {
      const double o = B(g) ? 2.0 : 0.0;
      const double x0 = N(g) + o;
      x = {x0, N(g) + o};
    }
    return p;
  };
  const auto X = cloud(m);
  const auto Y = cloud(n);
  Instance inst;
  inst.cost = Matrix(m, n);
  double mx = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = X[i][0] - Y[j][0], dy = X[i][1] - Y[j][1];
      inst.cost(i, j) = dx * dx + dy * dy;
      mx = std::max(mx, inst.cost(i, j));
    }
  if (mx > 0.0)
    for (double &v : inst.cost.flat())
      v /= mx;
  inst.a = Vector(m, 1.0 / static_cast<double>(m));
  inst.b = Vector(n, 1.0 / static_cast<double>(n));
  return inst;
}

/// Task assignment: U(0, 1) costs, round(r m) prioritized rows chosen by a
/// seeded shuffle, marginals from build_prioritized_marginals.
inline Instance generate_tasks(std::size_t m, std::size_t n, const BudgetSpec &budget,
                               double r, std::size_t h, std::uint64_t seed) {
  if (!(r >= 0.0 && r <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "r must lie in [0, 1]");
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Instance inst;
  inst.cost = Matrix(m, n);
  for (double &x : inst.cost.flat())
    x = U(g);
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), g);
  idx.resize(static_cast<std::size_t>(std::lround(r * static_cast<double>(m))));
  std::sort(idx.begin(), idx.end());
  const Marginals ab = build_prioritized_marginals(m, n, idx, h, budget);
  inst.a = ab.a();
  inst.b = ab.b();
  inst.prioritized = std::move(idx);
  return inst;
}

/// Preference ranks: each row ranks the columns by a random permutation;
/// rank k costs 1 - 1/k. Uniform marginals.
inline Instance generate_ranks(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0)
    throw Error(ErrorCode::DimensionMismatch, "empty instance");
  std::mt19937_64 g(seed);
  Instance inst;
  inst.cost = Matrix(m, n);
  inst.ranks.assign(m, std::vector<int>(n));
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), g);
    for (std::size_t j = 0; j < n; ++j) {
      inst.ranks[i][j] = perm[j];
      inst.cost(i, j) = 1.0 - 1.0 / static_cast<double>(perm[j]);
    }
  }
  inst.a = Vector(m, 1.0 / static_cast<double>(m));
  inst.b = Vector(n, 1.0 / static_cast<double>(n));
  return inst;
}

} // namespace scotm::io
