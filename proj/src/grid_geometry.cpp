#include "isac/grid_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace isac {

PositionGrid build_grid(double a_norm, double wavelength, double step, int cap) {
  if (!(a_norm > 0) || !(wavelength > 0) || !(step > 0))
    throw std::invalid_argument("build_grid: a, wavelength and step must be positive");
  const double span = a_norm * wavelength;
  if (span < step * (1.0 - 1e-12)) throw std::invalid_argument("build_grid: area side is smaller than the step");
  // small relative slack so that spans that are exact multiples of the step
  // are not lost to rounding (0.12 / 0.01 = 11.999...)
  const int per_axis = static_cast<int>(std::floor(span / step * (1.0 + 1e-9))) + 1;
  if (static_cast<long long>(per_axis) * per_axis > cap)
    throw std::invalid_argument("build_grid: grid exceeds the position cap");
  return lattice_grid(per_axis, per_axis, step, {}, wavelength);
}

PositionGrid lattice_grid(int mx, int my, double step, Point2 origin, double wavelength) {
  if (mx < 1 || my < 1 || !(step > 0)) throw std::invalid_argument("lattice_grid: invalid dimensions");
  PositionGrid g;
  g.step = step;
  g.wavelength = wavelength;
  g.mx = mx;
  g.my = my;
  g.positions.reserve(static_cast<size_t>(mx) * my);
  for (int iy = 0; iy < my; ++iy)
    for (int ix = 0; ix < mx; ++ix) g.positions.push_back({origin.x + ix * step, origin.y + iy * step});
  return g;
}

Mat distance_matrix(const PositionGrid& grid) {
  const int M = grid.size();
  Mat D(M, M);
  for (int i = 0; i < M; ++i) {
    D(i, i) = 0.0;
    for (int j = i + 1; j < M; ++j) {
      const double d = std::hypot(grid.positions[i].x - grid.positions[j].x, grid.positions[i].y - grid.positions[j].y);
      D(i, j) = D(j, i) = d;
    }
  }
  return D;
}

Vec SelectionState::b(int n) const {
  Vec v = Vec::Zero(M);
  v(index.at(n)) = 1.0;
  return v;
}

Mat selection_to_matrix(const std::vector<Vec>& b) {
  if (b.empty()) return Mat(0, 0);
  const Eigen::Index M = b.front().size();
  const int N = static_cast<int>(b.size());
  Mat B = Mat::Zero(M * N, N);
  for (int n = 0; n < N; ++n) {
    if (b[n].size() != M) throw std::invalid_argument("selection_to_matrix: length mismatch");
    B.block(n * M, n, M, 1) = b[n];
  }
  return B;
}

Mat selection_to_matrix(const SelectionState& s) {
  std::vector<Vec> b;
  for (int n = 0; n < s.N(); ++n) b.push_back(s.b(n));
  return selection_to_matrix(b);
}

std::vector<SelectionViolation> validate_selection(const std::vector<Vec>& b, const Mat& D, double d_min,
                                                   double tol) {
  std::vector<SelectionViolation> out;
  const int N = static_cast<int>(b.size());
  const Eigen::Index M = D.rows();
  for (int n = 0; n < N; ++n) {
    if (b[n].size() != M) {
      out.push_back({"length", n, -1, "element " + std::to_string(n) + ": length mismatch"});
      continue;
    }
    bool binary = true;
    for (Eigen::Index m = 0; m < M; ++m)
      if (std::abs(b[n](m)) > tol && std::abs(b[n](m) - 1.0) > tol) binary = false;
    if (!binary) out.push_back({"binary", n, -1, "element " + std::to_string(n) + ": non-binary entry"});
    const double sum = b[n].sum();
    if (std::abs(sum - 1.0) > tol) {
      std::ostringstream os;
      os << "element " << n << ": sum-to-one violated (sum = " << sum << ")";
      out.push_back({"sum-to-one", n, -1, os.str()});
    }
  }
  for (int n = 0; n < N; ++n)
    for (int n2 = n + 1; n2 < N; ++n2) {
      if (b[n].size() != M || b[n2].size() != M) continue;
      const double d = b[n].dot(D * b[n2]);
      if (d < d_min - tol) {
        std::ostringstream os;
        os << "elements " << n << "," << n2 << ": min-distance violated (" << d << " < " << d_min << ")";
        out.push_back({"min-distance", n, n2, os.str()});
      }
    }
  return out;
}

std::vector<SelectionViolation> validate_selection(const SelectionState& s, const Mat& D, double d_min) {
  std::vector<Vec> b;
  for (int n = 0; n < s.N(); ++n) {
    if (s.index[n] < 0 || s.index[n] >= D.rows()) return {{"length", n, -1, "position index out of range"}};
    Vec v = Vec::Zero(D.rows());
    v(s.index[n]) = 1.0;
    b.push_back(v);
  }
  return validate_selection(b, D, d_min);
}

int GloverLayout::phi(int pair, int a, int c) const {
  const Pair& p = pairs[pair];
  return p.offset + a * static_cast<int>(window[p.n2].size()) + c;
}

GloverLayout glover_layout(const std::vector<std::vector<int>>& windows) {
  GloverLayout L;
  L.N = static_cast<int>(windows.size());
  L.window = windows;
  for (int n = 0; n < L.N; ++n)
    for (int n2 = n + 1; n2 < L.N; ++n2) {
      L.pairs.push_back({n, n2, L.size});
      L.size += static_cast<int>(windows[n].size() * windows[n2].size());
    }
  return L;
}

GloverLayout glover_layout(int N, int M) {
  std::vector<int> all(M);
  for (int m = 0; m < M; ++m) all[m] = m;
  return glover_layout(std::vector<std::vector<int>>(N, all));
}

GloverRows glover_constraints(const GloverLayout& L, const Mat& D, double d_min,
                              const std::vector<std::vector<int>>& b_vars, const std::vector<int>& phi_vars) {
  GloverRows rows;
  for (int p = 0; p < static_cast<int>(L.pairs.size()); ++p) {
    const auto& pr = L.pairs[p];
    const auto& wi = L.window[pr.n];
    const auto& wj = L.window[pr.n2];
    LinExpr c5a(-d_min);
    for (size_t a = 0; a < wi.size(); ++a)
      for (size_t c = 0; c < wj.size(); ++c) {
        const int f = phi_vars[L.phi(p, static_cast<int>(a), static_cast<int>(c))];
        const int bi = b_vars[pr.n][a], bj = b_vars[pr.n2][c];
        c5a.add(f, D(wi[a], wj[c]));
        rows.c5b.push_back(LinExpr::var(bi) - LinExpr::var(f));
        rows.c5b.push_back(LinExpr::var(bj) - LinExpr::var(f));
        rows.c5c.push_back(LinExpr::var(f) - LinExpr::var(bi) - LinExpr::var(bj) + 1.0);
      }
    rows.c5a.push_back(c5a);
  }
  return rows;
}

bool glover_feasible(const GloverLayout& L, const Mat& D, double d_min, const std::vector<Vec>& b, const Vec& phi,
                     double tol) {
  for (int p = 0; p < static_cast<int>(L.pairs.size()); ++p) {
    const auto& pr = L.pairs[p];
    const auto& wi = L.window[pr.n];
    const auto& wj = L.window[pr.n2];
    double lhs = 0.0;
    for (size_t a = 0; a < wi.size(); ++a)
      for (size_t c = 0; c < wj.size(); ++c) {
        const double f = phi(L.phi(p, static_cast<int>(a), static_cast<int>(c)));
        const double bi = b[pr.n](wi[a]), bj = b[pr.n2](wj[c]);
        if (f > std::min(bi, bj) + tol) return false;
        if (f < bi + bj - 1.0 - tol) return false;
        lhs += D(wi[a], wj[c]) * f;
      }
    if (lhs < d_min - tol) return false;
  }
  return true;
}

SelectionState farthest_point_selection(const PositionGrid& grid, int N, double d_min,
                                        const std::vector<int>& allowed) {
  std::vector<int> cand = allowed;
  if (cand.empty())
    for (int m = 0; m < grid.size(); ++m) cand.push_back(m);
  auto dist = [&](int i, int j) {
    return std::hypot(grid.positions[i].x - grid.positions[j].x, grid.positions[i].y - grid.positions[j].y);
  };
  SelectionState s;
  s.M = grid.size();
  s.index.push_back(cand.front());
  while (s.N() < N) {
    int best = -1;
    double best_d = -1.0;
    for (int m : cand) {
      double dm = std::numeric_limits<double>::infinity();
      for (int c : s.index) dm = std::min(dm, dist(m, c));
      if (dm > best_d + 1e-12) {
        best_d = dm;
        best = m;
      }
    }
    if (best < 0 || best_d < d_min - 1e-12)
      throw std::runtime_error("farthest_point_selection: minimum distance cannot be met");
    s.index.push_back(best);
  }
  return s;
}

std::vector<int> lattice_window(const PositionGrid& grid, int m, int radius) {
  std::vector<int> out;
  const int cx = grid.col(m), cy = grid.row(m);
  for (int iy = std::max(0, cy - radius); iy <= std::min(grid.my - 1, cy + radius); ++iy)
    for (int ix = std::max(0, cx - radius); ix <= std::min(grid.mx - 1, cx + radius); ++ix)
      out.push_back(grid.index(ix, iy));
  return out;
}

}  // namespace isac
