/// @file
/// @brief Solves a small budgeted transport problem and prints the plan.
#include <cstdio>
#include <random>

#include "scotm/scotm.hpp"

int main() {
  using namespace scotm;
  const std::size_t m = 6, n = 8;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Matrix C(m, n);
  for (double &c : C.flat())
    c = U(rng);

  // Every source may use at most 3 targets, every target at most 3 sources.
  const BudgetSpec budget{3, 3};
  const Marginals ab(Vector(m, 1.0 / m), Vector(n, 1.0 / n));
  if (!check_theorem1(ab, budget))
    std::puts("sufficient conditions fail; the solver will still try the northwest fill");

  SolverConfig cfg;
  cfg.gamma = 0.1;
  cfg.q = 0.9;
  const SolverReport r = solve(CostMatrix(C), ab, budget, cfg);

  std::printf("converged=%d outer=%d inner=%d G=%.6f density=%.1f%%\n", r.converged,
              r.outer_iters, r.total_inner_iters, r.objective_G,
              density_percent(r.final_plan, cfg.zero_tol));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      std::printf(" %6.4f", r.final_plan(i, j));
    std::puts("");
  }
}
