#pragma once

// Quantized transmitter area, antenna position selection and the linearized
// minimum-distance constraints.

#include "isac/conic.hpp"

#include <string>
#include <vector>

namespace isac {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Uniform lattice, row-major from the bottom-left corner; p_1 is the phase reference.
struct PositionGrid {
  double step = 0.0;
  double wavelength = 0.06;  // carrier wavelength the steering phases refer to
  int mx = 0;
  int my = 0;
  std::vector<Point2> positions;

  int size() const { return static_cast<int>(positions.size()); }
  int index(int ix, int iy) const { return iy * mx + ix; }
  int col(int m) const { return m % mx; }
  int row(int m) const { return m / mx; }
};

constexpr int kDefaultGridCap = 10000;

// Mx = My = floor(a * wavelength / step) + 1, inclusive endpoints.
PositionGrid build_grid(double a_norm, double wavelength, double step, int cap = kDefaultGridCap);
// Rectangular mx x my lattice with the given step and origin.
PositionGrid lattice_grid(int mx, int my, double step, Point2 origin = {}, double wavelength = 0.06);

Mat distance_matrix(const PositionGrid& grid);

// Position index per antenna element: the binary vectors b_n are one-hot, so
// the index is the canonical representation.
struct SelectionState {
  int M = 0;
  std::vector<int> index;

  int N() const { return static_cast<int>(index.size()); }
  Vec b(int n) const;
};

// MN x N block-diagonal matrix with b_n in rows n*M..(n+1)*M-1 of column n.
Mat selection_to_matrix(const std::vector<Vec>& b);
Mat selection_to_matrix(const SelectionState& s);

struct SelectionViolation {
  std::string kind;  // "length", "sum-to-one", "binary", "min-distance"
  int n = -1;
  int n2 = -1;
  std::string message;
};

std::vector<SelectionViolation> validate_selection(const std::vector<Vec>& b, const Mat& D, double d_min,
                                                   double tol = 1e-9);
std::vector<SelectionViolation> validate_selection(const SelectionState& s, const Mat& D, double d_min);

// Auxiliary products phi_{n,n',i,j} for n < n' and (i, j) in window(n) x window(n').
// Flattened index: pair offset + a * |window(n')| + c for window entries a, c.
struct GloverLayout {
  int N = 0;
  std::vector<std::vector<int>> window;  // candidate positions per element
  struct Pair {
    int n, n2, offset;
  };
  std::vector<Pair> pairs;
  int size = 0;

  int phi(int pair, int a, int c) const;
};

GloverLayout glover_layout(const std::vector<std::vector<int>>& windows);
GloverLayout glover_layout(int N, int M);

// Linear rows of C5a-C5c over (b, phi); row value >= 0 when satisfied.
// b is indexed by element and window position, both as ConicProgram variables.
struct GloverRows {
  std::vector<LinExpr> c5a, c5b, c5c;
};

GloverRows glover_constraints(const GloverLayout& layout, const Mat& D, double d_min,
                              const std::vector<std::vector<int>>& b_vars, const std::vector<int>& phi_vars);

// Check C5a-C5c at a numeric point (b full length M per element, phi per layout).
bool glover_feasible(const GloverLayout& layout, const Mat& D, double d_min, const std::vector<Vec>& b,
                     const Vec& phi, double tol = 1e-9);

// Greedy farthest-point placement of N elements over the positions in `allowed`
// (all positions when empty) that respects d_min. Starts from the first allowed
// position; ties go to the lower index. Throws when d_min cannot be met.
SelectionState farthest_point_selection(const PositionGrid& grid, int N, double d_min,
                                        const std::vector<int>& allowed = {});

// All positions within Chebyshev radius r (in lattice steps) of position m.
std::vector<int> lattice_window(const PositionGrid& grid, int m, int radius);

}  // namespace isac
