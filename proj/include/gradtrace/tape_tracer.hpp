#pragma once

#include <string>
#include <vector>

#include "gradtrace/simplex.hpp"
#include "gradtrace/turing.hpp"

namespace gradtrace {

/// Bijection between (control state, head symbols) and simplex vertex
/// indices for a machine that satisfies the no-back-step property.
class VertexSet {
 public:
  VertexSet() = default;
  explicit VertexSet(const TuringMachine& tm)
      : states_(tm.state_count()), tapes_(tm.tape_count()) {}

  int size() const { return states_ << tapes_; }
  int index(int q, int symbol_idx) const { return (q << tapes_) | symbol_idx; }
  int state_of(int v) const { return v >> tapes_; }
  int symbols_of(int v) const { return v & ((1 << tapes_) - 1); }

 private:
  int states_ = 0;
  int tapes_ = 0;
};

/// Per-vertex read/write/shift tables: symbol_read maps a vertex to the head
/// symbols it encodes, symbol_write to the symbols the machine writes there,
/// and shift to the head moves. shift_apply realizes the bilinear head-shift
/// operator for a general simplex point.
struct TapeOperators {
  Mat symbol_read;    // d x |V|
  Mat symbol_write;   // d x |V|
  Eigen::MatrixXi shift;  // |V| x d, entries +-1

  Mat shift_apply(const Vec& x, const Mat& heads) const;
};

/// Scale constants of the head-local loss. The additive constant keeps the
/// loss nonnegative so the square-root lift downstream is defined.
struct TapeLossParams {
  double scale_base = 0.0;   // b
  double scale = 1.0;        // gamma
  double constant = 0.0;     // c
  int tape_count = 0;        // d
  int tape_bound = 0;        // tau

  double non_halting_floor() const { return constant; }
  double non_halting_ceiling() const {
    const double b = scale_base, d = tape_count;
    return constant + (8.0 * b * b * d + 3.0 * d) * scale;
  }
  double halting_ceiling() const {
    const double b = scale_base;
    return non_halting_ceiling() - b * b * b * scale;
  }

  /// Base inequalities on b; with require_halting_separation also the strict
  /// gap that puts every halting loss below every non-halting loss.
  bool valid(bool require_halting_separation = true) const;
  void validate(bool require_halting_separation = true) const;
};

/// Smallest integer b meeting the constraints for d tapes, with
/// c = (b^3 + d b) * gamma.
TapeLossParams choose_constants(int d, double gamma,
                                bool require_halting_separation = true);

struct MachineState {
  Vec s;    // simplex point over the vertex set, a vertex on traced runs
  Mat tape;   // tau x d, entries +-1
  Mat heads;  // tau x d, one-hot columns
};

struct ConstructionViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Head-local loss  c + l_S(x) + quadratic read/write/shift couplers, with
/// the stop-gradient placement that gives each coupler its direction.
class TapeLoss {
 public:
  TapeLoss(const TuringMachine& tm, int tau, TapeLossParams params);

  const TuringMachine& machine() const { return *tm_; }
  const VertexSet& vertex_set() const { return verts_; }
  const TapeOperators& ops() const { return ops_; }
  const TapeLossParams& params() const { return params_; }
  const SimplexLoss& vertex_loss() const { return vertex_loss_; }

  double value(const Vec& x, const Mat& tape, const Mat& heads) const;

  /// Gradient of the first coupler wrt the tape, restricted to writable
  /// columns (read-only columns are returned as zero).
  Mat grad_tape(const Vec& x, const Mat& tape, const Mat& heads) const;
  /// Gradient of the shift coupler wrt the head indicators.
  Mat grad_heads(const Vec& x, const Mat& tape, const Mat& heads) const;

  /// Frank-Wolfe target vertex from vertex v: corner evaluation of l_S plus
  /// the analytic quadratic correction of the read coupler.
  int descent_vertex(int v, const Mat& tape, const Mat& heads) const;

  MachineState initial_state(const Configuration& c) const;
  Configuration to_configuration(const MachineState& ms) const;

  /// One descent step; checks that the result stays on the vertex/one-hot/
  /// symbol grid and throws ConstructionViolation otherwise.
  MachineState gd_step(const MachineState& state) const;

  /// Counters over all gd_step calls: per-tape components whose vertex symbol
  /// already matches (hit) or differs from (miss) the symbol under the
  /// shifted head. Both cases must occur on a representative corpus.
  mutable long match_case_count = 0;
  mutable long mismatch_case_count = 0;

 private:
  const TuringMachine* tm_;
  VertexSet verts_;
  TapeOperators ops_;
  TapeLossParams params_;
  SimplexLoss vertex_loss_;
};

struct TapeTrace {
  std::vector<MachineState> states;
  std::vector<double> loss_values;
  bool halted = false;
};

/// Fixed-step descent until the loss drops to the halting ceiling. Throws if
/// max_iters pass without reaching it.
TapeTrace trace(const TapeLoss& loss, const MachineState& initial,
                int max_iters);

std::string trace_to_jsonl(const TapeLoss& loss, const TapeTrace& t);

}  // namespace gradtrace
