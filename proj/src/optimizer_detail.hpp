#pragma once

// Shared internals of the optimizer translation units.

#include "isac/optimizer.hpp"

#include <utility>
#include <vector>

namespace isac::detail {

// A = sum coef * X (Hermitian variables) + sum expr * M (constant matrices)
struct BorderedA {
  std::vector<std::pair<HermVar, double>> vars;
  std::vector<std::pair<LinExpr, CMat>> mats;
};

// [[iota I + A, A c], [c^H A, c^H A c + br - mu2 iota]]
HermExpr bordered_lmi(const BorderedA& A, const CVec& c, const LinExpr& iota, double mu2, const LinExpr& br);

SolveRecord make_record(const std::string& stage, const Solution& s);
SolverOptions solver_options(const Scenario& sc);

Vec default_durations(const Scenario& sc);
Mat default_lambdas(const Scenario& sc, const Vec& t);

}  // namespace isac::detail
