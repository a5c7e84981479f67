#include "gradtrace/tape_tracer.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace gradtrace {

namespace {

// Column-wise dot products diag(a^T b) as a d-vector.
Vec col_dots(const Mat& a, const Mat& b) {
  return (a.array() * b.array()).colwise().sum().transpose().matrix();
}

}  // namespace

Mat TapeOperators::shift_apply(const Vec& x, const Mat& heads) const {
  const int tau = static_cast<int>(heads.rows());
  const int d = static_cast<int>(heads.cols());
  Mat out = Mat::Zero(tau, d);
  for (int v = 0; v < x.size(); ++v) {
    if (x[v] == 0.0) continue;
    for (int j = 0; j < d; ++j) {
      const int s = shift(v, j);  // new head index = old + s
      const int len = tau - std::abs(s);
      out.col(j).segment(s > 0 ? s : 0, len) +=
          x[v] * heads.col(j).segment(s > 0 ? 0 : -s, len);
    }
  }
  return out;
}

bool TapeLossParams::valid(bool require_halting_separation) const {
  const double b = scale_base, d = tape_count;
  if (!(b > 1.0)) return false;                             // b^2 > b
  if (!(b * b * b >= 0.5 * (b * b * b + d * b))) return false;
  if (!(0.5 * b * b * b - d * b >= 2.0 * d * b * b)) return false;
  if (require_halting_separation && !(8.0 * b * b * d + 3.0 * d < b * b * b))
    return false;
  return true;
}

void TapeLossParams::validate(bool require_halting_separation) const {
  if (!valid(require_halting_separation)) {
    std::ostringstream os;
    os << "scale base b=" << scale_base << " fails the weight constraints for d="
       << tape_count;
    if (require_halting_separation && valid(false))
      os << " (halting separation 8b^2d+3d < b^3 violated)";
    throw std::invalid_argument(os.str());
  }
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
}

TapeLossParams choose_constants(int d, double gamma,
                                bool require_halting_separation) {
  if (d < 2) throw std::invalid_argument("need at least two tapes");
  if (!(gamma > 0.0)) throw std::invalid_argument("scale must be positive");
  TapeLossParams p;
  p.tape_count = d;
  p.scale = gamma;
  for (int b = 2;; ++b) {
    p.scale_base = b;
    if (p.valid(require_halting_separation)) break;
  }
  const double b = p.scale_base;
  p.constant = (b * b * b + d * b) * gamma;
  return p;
}

TapeLoss::TapeLoss(const TuringMachine& tm, int tau, TapeLossParams params)
    : tm_(&tm), verts_(tm), params_(std::move(params)) {
  params_.tape_bound = tau;
  params_.tape_count = tm.tape_count();
  params_.validate(false);
  if (!no_back_step(tm))
    throw std::invalid_argument(
        "machine admits a back-step pair; the vertex loss is not well "
        "defined (triple the states first)");

  const int d = tm.tape_count();
  const int m = verts_.size();
  const int combos = 1 << d;
  const double b = params_.scale_base;
  const double gamma = params_.scale;

  ops_.symbol_read.resize(d, m);
  ops_.symbol_write.resize(d, m);
  ops_.shift.resize(m, d);
  for (int v = 0; v < m; ++v) {
    const int q = verts_.state_of(v);
    const Eigen::VectorXi t = tm.symbols_from_index(verts_.symbols_of(v));
    const Transition& tr = tm.transition(q, verts_.symbols_of(v));
    ops_.symbol_read.col(v) = t.cast<double>();
    ops_.symbol_write.col(v) = tr.write.cast<double>();
    ops_.shift.row(v) = tr.move.transpose();
  }

  vertex_loss_.dim = m;
  for (int v = 0; v < m; ++v) {
    if (!tm.is_accepting(verts_.state_of(v))) continue;
    BasisFunction f;
    f.add(1.0, hat(v, 0.25, m));
    vertex_loss_.add(-b * b * b * gamma, std::move(f));
  }
  for (int v = 0; v < m; ++v) {
    const int q = verts_.state_of(v);
    if (tm.is_accepting(q)) continue;
    const int t = verts_.symbols_of(v);
    const int q_next = tm.transition(q, t).next_state;
    for (int t_next = 0; t_next < combos; ++t_next) {
      const int w = verts_.index(q_next, t_next);
      const int matches = d - std::popcount(static_cast<unsigned>(t ^ t_next));
      vertex_loss_.add(-(b * b * b + matches * b) * gamma, profile(v, w, m));
    }
  }
  vertex_loss_.compile();
}

double TapeLoss::value(const Vec& x, const Mat& tape, const Mat& heads) const {
  const double gamma = params_.scale;
  const double b = params_.scale_base;
  const Mat shifted = ops_.shift_apply(x, heads);
  const Vec under_head = col_dots(tape, heads);
  const Vec under_shifted = col_dots(tape, shifted);

  double v = params_.constant + vertex_loss_.value(x);
  v += 0.5 * gamma * (under_head - ops_.symbol_write * x).squaredNorm();
  v += 0.5 * (4.0 * b * b * gamma) *
       (under_shifted - ops_.symbol_read * x).squaredNorm();
  v += 0.5 * gamma * (shifted - heads).squaredNorm();
  return v;
}

Mat TapeLoss::grad_tape(const Vec& x, const Mat& tape, const Mat& heads) const {
  const Vec residual = col_dots(tape, heads) - ops_.symbol_write * x;
  Mat g = Mat::Zero(tape.rows(), tape.cols());
  for (int i = 0; i < tape.cols(); ++i) {
    if (tm_->is_read_only(i)) continue;
    g.col(i) = params_.scale * residual[i] * heads.col(i);
  }
  return g;
}

Mat TapeLoss::grad_heads(const Vec& x, const Mat& tape, const Mat& heads) const {
  return -params_.scale * (ops_.shift_apply(x, heads) - heads);
}

int TapeLoss::descent_vertex(int v, const Mat& tape, const Mat& heads) const {
  const double b = params_.scale_base;
  QuadraticTerm quad;
  quad.a = ops_.symbol_read;
  quad.y_target = col_dots(
      tape, ops_.shift_apply(simplex_vertex(v, verts_.size()), heads));
  quad.coefficient = 4.0 * b * b * params_.scale;
  auto f = [this](const Vec& x) { return vertex_loss_.value(x); };
  return corner_argmin(f, v, 0.25, verts_.size(), quad);
}

MachineState TapeLoss::initial_state(const Configuration& c) const {
  MachineState ms;
  ms.s = simplex_vertex(
      verts_.index(c.state, tm_->read_index(c.symbols_under_heads())),
      verts_.size());
  ms.tape = c.tapes.cast<double>();
  ms.heads = Mat::Zero(c.tapes.rows(), c.tapes.cols());
  for (int i = 0; i < c.heads.size(); ++i) ms.heads(c.heads[i], i) = 1.0;
  return ms;
}

Configuration TapeLoss::to_configuration(const MachineState& ms) const {
  int v = -1;
  for (int i = 0; i < ms.s.size(); ++i)
    if (ms.s[i] == 1.0) v = i;
  Configuration c;
  c.state = verts_.state_of(v);
  c.tapes.resize(ms.tape.rows(), ms.tape.cols());
  for (int j = 0; j < ms.tape.cols(); ++j)
    for (int i = 0; i < ms.tape.rows(); ++i)
      c.tapes(i, j) = ms.tape(i, j) > 0.0 ? 1 : -1;
  c.heads.resize(ms.heads.cols());
  for (int j = 0; j < ms.heads.cols(); ++j) {
    int h = -1;
    ms.heads.col(j).maxCoeff(&h);
    c.heads[j] = h;
  }
  return c;
}

namespace {

std::string dump_state(const MachineState& ms) {
  std::ostringstream os;
  os << "s = [" << ms.s.transpose() << "]\ntape =\n"
     << ms.tape << "\nheads =\n"
     << ms.heads;
  return os.str();
}

void check_grid(const MachineState& ms) {
  int ones = 0;
  for (int i = 0; i < ms.s.size(); ++i) {
    if (ms.s[i] == 1.0)
      ++ones;
    else if (ms.s[i] != 0.0)
      throw ConstructionViolation("s is not a vertex\n" + dump_state(ms));
  }
  if (ones != 1)
    throw ConstructionViolation("s is not a vertex\n" + dump_state(ms));
  for (int j = 0; j < ms.heads.cols(); ++j) {
    double sum = 0.0;
    for (int i = 0; i < ms.heads.rows(); ++i) {
      const double h = ms.heads(i, j);
      if (h != 0.0 && h != 1.0)
        throw ConstructionViolation("head indicator off the 0/1 grid\n" +
                                    dump_state(ms));
      sum += h;
    }
    if (sum != 1.0)
      throw ConstructionViolation("head column " + std::to_string(j + 1) +
                                  " is not one-hot\n" + dump_state(ms));
  }
  for (int j = 0; j < ms.tape.cols(); ++j)
    for (int i = 0; i < ms.tape.rows(); ++i)
      if (std::abs(ms.tape(i, j)) != 1.0)
        throw ConstructionViolation("tape entry outside {-1,+1}\n" +
                                    dump_state(ms));
}

}  // namespace

MachineState TapeLoss::gd_step(const MachineState& state) const {
  check_grid(state);
  int v = -1;
  for (int i = 0; i < state.s.size(); ++i)
    if (state.s[i] == 1.0) v = i;
  if (tm_->is_accepting(verts_.state_of(v)))
    throw AlreadyHalted("descent step from a halting vertex");

  // Tracked proof cases: vertex symbol vs symbol under the shifted head.
  const Vec under_shifted =
      col_dots(state.tape, ops_.shift_apply(state.s, state.heads));
  for (int i = 0; i < tm_->tape_count(); ++i) {
    if (ops_.symbol_read(i, v) == under_shifted[i])
      ++match_case_count;
    else
      ++mismatch_case_count;
  }

  MachineState next;
  next.s = simplex_vertex(descent_vertex(v, state.tape, state.heads),
                          verts_.size());
  next.tape =
      state.tape - grad_tape(state.s, state.tape, state.heads) / params_.scale;
  next.heads =
      state.heads - grad_heads(state.s, state.tape, state.heads) / params_.scale;
  check_grid(next);

  // The new vertex must encode the symbols actually under the new heads.
  int w = -1;
  for (int i = 0; i < next.s.size(); ++i)
    if (next.s[i] == 1.0) w = i;
  const Vec now_under = col_dots(next.tape, next.heads);
  if ((ops_.symbol_read.col(w) - now_under).cwiseAbs().maxCoeff() != 0.0)
    throw ConstructionViolation("next vertex disagrees with the tape\n" +
                                dump_state(next));
  return next;
}

TapeTrace trace(const TapeLoss& loss, const MachineState& initial,
                int max_iters) {
  const double threshold =
      loss.params().halting_ceiling() + 0.5 * loss.params().scale;
  TapeTrace out;
  out.states.push_back(initial);
  out.loss_values.push_back(
      loss.value(initial.s, initial.tape, initial.heads));
  if (out.loss_values.back() <= threshold) {
    out.halted = true;
    return out;
  }
  for (int k = 0; k < max_iters; ++k) {
    out.states.push_back(loss.gd_step(out.states.back()));
    const MachineState& ms = out.states.back();
    out.loss_values.push_back(loss.value(ms.s, ms.tape, ms.heads));
    if (out.loss_values.back() <= threshold) {
      out.halted = true;
      return out;
    }
  }
  throw std::runtime_error("no halting loss within " +
                           std::to_string(max_iters) + " descent steps");
}

std::string trace_to_jsonl(const TapeLoss& loss, const TapeTrace& t) {
  std::ostringstream os;
  for (size_t k = 0; k < t.states.size(); ++k) {
    const Configuration c = loss.to_configuration(t.states[k]);
    nlohmann::json line;
    line["step"] = k;
    line["state"] = loss.machine().state_names()[c.state];
    line["loss"] = t.loss_values[k];
    line["heads"] =
        std::vector<int>(c.heads.data(), c.heads.data() + c.heads.size());
    std::vector<std::vector<int>> tapes(c.tapes.cols());
    for (int i = 0; i < c.tapes.cols(); ++i)
      for (int r = 0; r < c.tapes.rows(); ++r)
        tapes[i].push_back(c.tapes(r, i));
    line["tapes"] = tapes;
    os << line.dump() << "\n";
  }
  return os.str();
}

}  // namespace gradtrace
