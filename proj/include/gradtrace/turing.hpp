#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gradtrace {

/// Tape symbols are {-1, +1}; -1 doubles as the blank. Payload bits map as
/// 1 -> +1 and 0 -> -1.
constexpr int kBlank = -1;

struct Transition {
  int next_state = 0;
  Eigen::VectorXi write;  // d entries in {-1,+1}
  Eigen::VectorXi move;   // d entries in {-1,+1}
};

/// Multi-tape machine over the two-symbol alphabet. The transition table is
/// total on non-accepting states; accepting states are absorbing and their
/// rows are synthesized (never executed).
class TuringMachine {
 public:
  TuringMachine(std::vector<std::string> state_names, int initial,
                std::vector<int> accepting, int tape_count,
                std::vector<int> read_only);

  int state_count() const { return static_cast<int>(state_names_.size()); }
  int tape_count() const { return tape_count_; }
  int initial_state() const { return initial_; }
  const std::vector<std::string>& state_names() const { return state_names_; }
  const std::vector<int>& read_only_tapes() const { return read_only_; }
  bool is_accepting(int q) const { return accepting_mask_[q]; }
  bool is_read_only(int tape) const { return read_only_mask_[tape]; }

  /// Symbol combination index for a read vector, bit i set iff tape i reads +1.
  int read_index(const Eigen::VectorXi& symbols) const;
  Eigen::VectorXi symbols_from_index(int idx) const;

  void set_transition(int q, const Eigen::VectorXi& read, Transition t);
  const Transition& transition(int q, const Eigen::VectorXi& read) const;
  const Transition& transition(int q, int read_idx) const;

  /// Verifies the table is total on non-accepting states and that read-only
  /// tapes are always written back unchanged. Fills absorbing rows for
  /// accepting states. Call once after all set_transition calls.
  void finalize();
  bool finalized() const { return finalized_; }

 private:
  std::vector<std::string> state_names_;
  int initial_;
  std::vector<int> accepting_;
  std::vector<bool> accepting_mask_;
  int tape_count_;
  std::vector<int> read_only_;
  std::vector<bool> read_only_mask_;
  // delta_[q * 2^d + read_idx]
  std::vector<std::optional<Transition>> delta_;
  bool finalized_ = false;
};

/// Snapshot of a run: control state, tape contents (tau x d, entries +-1) and
/// head positions. Heads live in [1, tau-2]; cells 0 and tau-1 are guards.
struct Configuration {
  int state = 0;
  Eigen::MatrixXi tapes;  // tau x d
  Eigen::VectorXi heads;  // d entries

  int tape_bound() const { return static_cast<int>(tapes.rows()); }
  Eigen::VectorXi symbols_under_heads() const;
  bool operator==(const Configuration& other) const;
};

struct ExecutionTrace {
  std::vector<Configuration> configs;
  bool halted = false;
  int step_count = 0;  // number of transitions taken
};

struct TapeBoundViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AlreadyHalted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Single transition. Throws AlreadyHalted when the state is accepting and
/// TapeBoundViolation when a head would step onto a guard cell.
Configuration step(const TuringMachine& tm, const Configuration& c);

/// Iterates step until an accepting state or max_steps transitions.
ExecutionTrace run(const TuringMachine& tm, const Configuration& c0,
                   int max_steps);

/// State-tripling transform: states become (q, r) with r cycling mod 3 so no
/// two states can step to each other in both directions.
TuringMachine triple_states(const TuringMachine& tm);

/// Index of tripled state (q, r) in the machine produced by triple_states.
inline int tripled_state_index(int q, int r) { return q * 3 + r; }

/// True iff no pair of control-symbol vertices (q,t), (q',t') admits steps in
/// both directions. Checked by brute force over all vertex pairs; this is the
/// precondition for the head-local loss construction.
bool no_back_step(const TuringMachine& tm);

/// Blank configuration with the payload written on the first read-only tape
/// from cell 1, all heads at cell 1, control in the initial state.
Configuration make_initial(const TuringMachine& tm,
                           const std::vector<int>& ro_payload, int tau);

/// Variant with one payload per tape (1-based tape id -> bits as +-1).
Configuration make_initial(const TuringMachine& tm,
                           const std::vector<std::pair<int, std::vector<int>>>&
                               payloads_by_tape,
                           int tau);

}  // namespace gradtrace
