#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace gradtrace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Vertex e_v of the standard simplex in R^m.
Vec simplex_vertex(int v, int m);

/// Edge point (1-mu) e_v + mu e_w.
Vec edge_point(int v, int w, double mu, int m);

bool on_simplex(const Vec& x, double tol = 1e-12);

/// One ReLU piece max{0, n.x - offset}.
struct AffinePiece {
  Vec normal;
  double offset = 0.0;

  double pre_relu(const Vec& x) const { return normal.dot(x) - offset; }
  double value(const Vec& x) const { return std::max(0.0, pre_relu(x)); }
};

/// Signed combination of ReLU pieces; the building block for all basis
/// functions used here.
struct BasisFunction {
  std::vector<std::pair<double, AffinePiece>> parts;

  double value(const Vec& x) const {
    double s = 0.0;
    for (const auto& [c, p] : parts) s += c * p.value(x);
    return s;
  }
  BasisFunction& add(double coeff, AffinePiece piece) {
    parts.emplace_back(coeff, std::move(piece));
    return *this;
  }
  BasisFunction& add_scaled(double coeff, const BasisFunction& other) {
    for (const auto& [c, p] : other.parts) parts.emplace_back(coeff * c, p);
    return *this;
  }
};

/// Corner hat: 1 at e_v, 0 on and beyond the cut plane through the points
/// (1-mu) e_v + mu e_w, linear on the corner.
AffinePiece hat(int v, double mu, int m);

/// Edge bump: 1 at the edge midpoint e_vw, 0 at all vertices and all other
/// edge midpoints, linear on every half corner.
BasisFunction edge_bump(int v, int w, int m);

/// Single ReLU piece that is 1 at e_v, zero on the unsymmetric corner cut
/// through (1-mu) e_v + mu e_w and the midpoints (e_v + e_u)/2, u != v,w, and
/// zero beyond it. The cut plane is found as the least-norm solution of the
/// interpolation system; a residual above 1e-8 reports degeneracy.
AffinePiece unsymmetric_corner(int v, int w, double mu, int m);

/// Edge profile: 0 at every vertex, 1 at the quarter point toward w, 1/2 at
/// the three-quarter point, zero at quarter points of other edges, linear on
/// all quarter corners.
BasisFunction profile(int v, int w, int m);

/// Weighted sum of basis functions over the standard simplex in R^m.
struct SimplexLoss {
  int dim = 0;
  std::vector<std::pair<double, BasisFunction>> terms;

  double value(const Vec& x) const {
    if (compiled) return coeffs.dot((rows * x - offsets).cwiseMax(0.0));
    double s = 0.0;
    for (const auto& [w, f] : terms) s += w * f.value(x);
    return s;
  }
  double operator()(const Vec& x) const { return value(x); }

  void add(double weight, BasisFunction f) {
    terms.emplace_back(weight, std::move(f));
  }

  /// Stacks all ReLU rows into (N, d, c) with value(x) = c . relu(N x - d).
  void compile();
  Mat rows;       // one normal per row
  Vec offsets;    // one offset per row
  Vec coeffs;     // weight * part coefficient per row
  bool compiled = false;
};

/// One-sided directional derivative of `loss` at x toward y, exact whenever
/// the loss is affine on the segment from x to (1-mu) x + mu y:
/// (loss((1-mu)x + mu y) - loss(x)) / mu.
double dir_deriv(const std::function<double(const Vec&)>& loss, const Vec& x,
                 const Vec& y, double mu);

/// Optional quadratic companion (1/2)||A x - y||^2 scaled by `coefficient`.
struct QuadraticTerm {
  Mat a;
  Vec y_target;
  double coefficient = 1.0;
};

/// Minimizer vertex w of  loss((1-mu) e_v + mu e_u)
///                        + coefficient * mu * (A e_v - y)^T A e_u  over u.
/// Requires the loss to be affine on the corner of v at scale mu. Ties prefer
/// staying at v, then the lowest index; values within `tie_tol` count as tied.
int corner_argmin(const std::function<double(const Vec&)>& loss, int v,
                  double mu, int m,
                  const std::optional<QuadraticTerm>& quad = std::nullopt,
                  double tie_tol = 1e-9);

}  // namespace gradtrace
