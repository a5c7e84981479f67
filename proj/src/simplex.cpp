#include "gradtrace/simplex.hpp"

#include <stdexcept>

namespace gradtrace {

Vec simplex_vertex(int v, int m) {
  Vec e = Vec::Zero(m);
  e[v] = 1.0;
  return e;
}

Vec edge_point(int v, int w, double mu, int m) {
  Vec x = Vec::Zero(m);
  x[v] += 1.0 - mu;
  x[w] += mu;
  return x;
}

bool on_simplex(const Vec& x, double tol) {
  if (x.minCoeff() < -tol) return false;
  return std::abs(x.sum() - 1.0) <= tol;
}

AffinePiece hat(int v, double mu, int m) {
  if (m < 2) throw std::invalid_argument("hat needs dimension >= 2");
  if (v < 0 || v >= m) throw std::invalid_argument("hat vertex out of range");
  AffinePiece p;
  p.normal = Vec::Constant(m, -1.0 / (mu * m));
  p.normal[v] = (m - 1) / (mu * m);
  p.offset = ((1.0 - mu) * m - 1.0) / (mu * m);
  return p;
}

BasisFunction edge_bump(int v, int w, int m) {
  if (m < 3) throw std::invalid_argument("edge bump needs dimension >= 3");
  if (v == w) throw std::invalid_argument("edge bump needs distinct vertices");
  AffinePiece cut;
  cut.normal = Vec::Constant(m, -4.0 / m);
  cut.normal[v] = 2.0 - 4.0 / m;
  cut.normal[w] = 2.0 - 4.0 / m;
  cut.offset = 1.0 - 4.0 / m;

  BasisFunction f;
  f.add(1.0, std::move(cut));
  f.add(-1.0, hat(v, 0.5, m));
  f.add(-1.0, hat(w, 0.5, m));
  return f;
}

AffinePiece unsymmetric_corner(int v, int w, double mu, int m) {
  if (m < 3) throw std::invalid_argument("unsymmetric corner needs dimension >= 3");
  if (v == w) throw std::invalid_argument("vertices must differ");
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must be in (0,1]");

  // Unknowns (n, offset): zero at the m-1 cut points, one at e_v. The system
  // is underdetermined on R^m x R; the least-norm solution fixes the gauge
  // along the affine hull.
  Mat a(m, m + 1);
  Vec rhs = Vec::Zero(m);
  int row = 0;
  a.row(row).head(m) = edge_point(v, w, mu, m).transpose();
  a(row, m) = -1.0;
  ++row;
  for (int u = 0; u < m; ++u) {
    if (u == v || u == w) continue;
    a.row(row).head(m) = edge_point(v, u, 0.5, m).transpose();
    a(row, m) = -1.0;
    ++row;
  }
  a.row(row).head(m) = simplex_vertex(v, m).transpose();
  a(row, m) = -1.0;
  rhs[row] = 1.0;

  const Vec sol = a.completeOrthogonalDecomposition().solve(rhs);
  if ((a * sol - rhs).norm() > 1e-8)
    throw std::runtime_error("degenerate unsymmetric corner system");

  AffinePiece p;
  p.normal = sol.head(m);
  p.offset = sol[m];
  return p;
}

BasisFunction profile(int v, int w, int m) {
  if (v == w) throw std::invalid_argument("vertices must differ");
  BasisFunction f = edge_bump(v, w, m);
  f.add(1.0, hat(v, 0.5, m));
  f.add(-1.0, unsymmetric_corner(v, w, 0.25, m));
  return f;
}

void SimplexLoss::compile() {
  int n = 0;
  for (const auto& [w, f] : terms) n += static_cast<int>(f.parts.size());
  rows.resize(n, dim);
  offsets.resize(n);
  coeffs.resize(n);
  int r = 0;
  for (const auto& [w, f] : terms) {
    for (const auto& [c, p] : f.parts) {
      rows.row(r) = p.normal.transpose();
      offsets[r] = p.offset;
      coeffs[r] = w * c;
      ++r;
    }
  }
  compiled = true;
}

double dir_deriv(const std::function<double(const Vec&)>& loss, const Vec& x,
                 const Vec& y, double mu) {
  const Vec mid = (1.0 - mu) * x + mu * y;
  return (loss(mid) - loss(x)) / mu;
}

int corner_argmin(const std::function<double(const Vec&)>& loss, int v,
                  double mu, int m, const std::optional<QuadraticTerm>& quad,
                  double tie_tol) {
  Vec residual;
  if (quad) residual = quad->a * simplex_vertex(v, m) - quad->y_target;

  int best = -1;
  double best_val = 0.0;
  Vec scores(m);
  for (int u = 0; u < m; ++u) {
    double val = loss(edge_point(v, u, mu, m));
    if (quad)
      val += quad->coefficient * mu * residual.dot(quad->a.col(u));
    scores[u] = val;
    if (best < 0 || val < best_val) {
      best = u;
      best_val = val;
    }
  }
  // Stay-in-place preference within the tie tolerance, then lowest index.
  if (scores[v] <= best_val + tie_tol) return v;
  for (int u = 0; u < m; ++u)
    if (scores[u] <= best_val + tie_tol) return u;
  return best;
}

}  // namespace gradtrace
