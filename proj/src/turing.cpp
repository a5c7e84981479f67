#include "gradtrace/turing.hpp"

#include <algorithm>
#include <sstream>

namespace gradtrace {

namespace {

std::string describe_read(const Eigen::VectorXi& read) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < read.size(); ++i)
    os << (i ? "," : "") << (read[i] > 0 ? "+1" : "-1");
  os << ")";
  return os.str();
}

}  // namespace

TuringMachine::TuringMachine(std::vector<std::string> state_names, int initial,
                             std::vector<int> accepting, int tape_count,
                             std::vector<int> read_only)
    : state_names_(std::move(state_names)),
      initial_(initial),
      accepting_(std::move(accepting)),
      tape_count_(tape_count),
      read_only_(std::move(read_only)) {
  if (state_names_.empty()) throw std::invalid_argument("machine needs states");
  if (tape_count_ < 1) throw std::invalid_argument("machine needs tapes");
  if (initial_ < 0 || initial_ >= state_count())
    throw std::invalid_argument("initial state out of range");
  accepting_mask_.assign(state_names_.size(), false);
  for (int q : accepting_) {
    if (q < 0 || q >= state_count())
      throw std::invalid_argument("accepting state out of range");
    accepting_mask_[q] = true;
  }
  read_only_mask_.assign(tape_count_, false);
  for (int t : read_only_) {
    if (t < 0 || t >= tape_count_)
      throw std::invalid_argument("read-only tape out of range");
    read_only_mask_[t] = true;
  }
  delta_.assign(state_names_.size() << tape_count_, std::nullopt);
}

int TuringMachine::read_index(const Eigen::VectorXi& symbols) const {
  if (symbols.size() != tape_count_)
    throw std::invalid_argument("read vector has wrong arity");
  int idx = 0;
  for (int i = 0; i < tape_count_; ++i) {
    if (symbols[i] != 1 && symbols[i] != -1)
      throw std::invalid_argument("tape symbol outside {-1,+1}");
    if (symbols[i] == 1) idx |= 1 << i;
  }
  return idx;
}

Eigen::VectorXi TuringMachine::symbols_from_index(int idx) const {
  Eigen::VectorXi s(tape_count_);
  for (int i = 0; i < tape_count_; ++i) s[i] = (idx >> i) & 1 ? 1 : -1;
  return s;
}

void TuringMachine::set_transition(int q, const Eigen::VectorXi& read,
                                   Transition t) {
  if (finalized_) throw std::logic_error("machine already finalized");
  if (q < 0 || q >= state_count())
    throw std::invalid_argument("state out of range");
  if (t.next_state < 0 || t.next_state >= state_count())
    throw std::invalid_argument("next state out of range");
  if (t.write.size() != tape_count_ || t.move.size() != tape_count_)
    throw std::invalid_argument("write/move arity mismatch");
  for (int i = 0; i < tape_count_; ++i) {
    if (std::abs(t.write[i]) != 1 || std::abs(t.move[i]) != 1)
      throw std::invalid_argument("write/move entries must be +-1");
  }
  delta_[(q << tape_count_) | read_index(read)] = std::move(t);
}

const Transition& TuringMachine::transition(int q, int read_idx) const {
  const auto& slot = delta_[(q << tape_count_) | read_idx];
  if (!slot.has_value()) throw std::logic_error("transition gap");
  return *slot;
}

const Transition& TuringMachine::transition(int q,
                                            const Eigen::VectorXi& read) const {
  return transition(q, read_index(read));
}

void TuringMachine::finalize() {
  const int combos = 1 << tape_count_;
  for (int q = 0; q < state_count(); ++q) {
    for (int r = 0; r < combos; ++r) {
      auto& slot = delta_[(q << tape_count_) | r];
      if (accepting_mask_[q]) {
        // Absorbing row; the simulator never executes it.
        Transition t;
        t.next_state = q;
        t.write = symbols_from_index(r);
        t.move = Eigen::VectorXi::Ones(tape_count_);
        slot = std::move(t);
        continue;
      }
      if (!slot.has_value()) {
        throw std::invalid_argument("transition table not total: state '" +
                                    state_names_[q] + "' read " +
                                    describe_read(symbols_from_index(r)));
      }
      const Eigen::VectorXi read = symbols_from_index(r);
      for (int i : read_only_) {
        if (slot->write[i] != read[i])
          throw std::invalid_argument(
              "read-only tape " + std::to_string(i + 1) +
              " written by state '" + state_names_[q] + "'");
      }
    }
  }
  finalized_ = true;
}

Eigen::VectorXi Configuration::symbols_under_heads() const {
  Eigen::VectorXi s(tapes.cols());
  for (int i = 0; i < tapes.cols(); ++i) s[i] = tapes(heads[i], i);
  return s;
}

bool Configuration::operator==(const Configuration& other) const {
  return state == other.state && heads == other.heads && tapes == other.tapes;
}

Configuration step(const TuringMachine& tm, const Configuration& c) {
  if (!tm.finalized()) throw std::logic_error("machine not finalized");
  if (tm.is_accepting(c.state))
    throw AlreadyHalted("step on accepting state '" +
                        tm.state_names()[c.state] + "'");
  const int tau = c.tape_bound();
  const Eigen::VectorXi read = c.symbols_under_heads();
  const Transition& t = tm.transition(c.state, read);

  Configuration next = c;
  next.state = t.next_state;
  for (int i = 0; i < tm.tape_count(); ++i) {
    next.tapes(c.heads[i], i) = t.write[i];
    const int h = c.heads[i] + t.move[i];
    if (h < 1 || h > tau - 2) {
      throw TapeBoundViolation("head " + std::to_string(i + 1) +
                               " leaves the interior [1," +
                               std::to_string(tau - 2) + "] of a tape of " +
                               "bound " + std::to_string(tau));
    }
    next.heads[i] = h;
  }
  return next;
}

ExecutionTrace run(const TuringMachine& tm, const Configuration& c0,
                   int max_steps) {
  ExecutionTrace trace;
  trace.configs.push_back(c0);
  while (!tm.is_accepting(trace.configs.back().state) &&
         trace.step_count < max_steps) {
    trace.configs.push_back(step(tm, trace.configs.back()));
    ++trace.step_count;
  }
  trace.halted = tm.is_accepting(trace.configs.back().state);
  return trace;
}

TuringMachine triple_states(const TuringMachine& tm) {
  if (!tm.finalized()) throw std::logic_error("machine not finalized");
  std::vector<std::string> names;
  names.reserve(tm.state_count() * 3);
  for (int q = 0; q < tm.state_count(); ++q)
    for (int r = 0; r < 3; ++r)
      names.push_back(tm.state_names()[q] + "#" + std::to_string(r));

  std::vector<int> accepting;
  for (int q = 0; q < tm.state_count(); ++q)
    if (tm.is_accepting(q))
      for (int r = 0; r < 3; ++r) accepting.push_back(tripled_state_index(q, r));

  TuringMachine out(std::move(names), tripled_state_index(tm.initial_state(), 0),
                    std::move(accepting), tm.tape_count(),
                    tm.read_only_tapes());

  const int combos = 1 << tm.tape_count();
  for (int q = 0; q < tm.state_count(); ++q) {
    if (tm.is_accepting(q)) continue;
    for (int idx = 0; idx < combos; ++idx) {
      const Transition& t = tm.transition(q, idx);
      for (int r = 0; r < 3; ++r) {
        Transition tt = t;
        tt.next_state = tripled_state_index(t.next_state, (r + 1) % 3);
        out.set_transition(tripled_state_index(q, r),
                           tm.symbols_from_index(idx), std::move(tt));
      }
    }
  }
  out.finalize();
  return out;
}

bool no_back_step(const TuringMachine& tm) {
  // Vertices are (q, t); (v, w) is an edge iff w's control state is
  // delta_1(q, t) and v is non-accepting.
  const int combos = 1 << tm.tape_count();
  const int n = tm.state_count() * combos;
  auto next_control = [&](int v) -> int {
    const int q = v / combos;
    if (tm.is_accepting(q)) return -1;
    return tm.transition(q, v % combos).next_state;
  };
  for (int v = 0; v < n; ++v) {
    const int qv = next_control(v);
    if (qv < 0) continue;
    for (int w = 0; w < n; ++w) {
      if (w / combos != qv) continue;  // not an edge v -> w
      const int qw = next_control(w);
      if (qw == v / combos) return false;  // w -> v also legal
    }
  }
  return true;
}

Configuration make_initial(const TuringMachine& tm,
                           const std::vector<int>& ro_payload, int tau) {
  if (ro_payload.empty())
    return make_initial(tm, std::vector<std::pair<int, std::vector<int>>>{},
                        tau);
  if (tm.read_only_tapes().empty())
    throw std::invalid_argument("payload given but machine has no RO tape");
  const int first_ro =
      *std::min_element(tm.read_only_tapes().begin(), tm.read_only_tapes().end());
  return make_initial(tm, {{first_ro + 1, ro_payload}}, tau);
}

Configuration make_initial(
    const TuringMachine& tm,
    const std::vector<std::pair<int, std::vector<int>>>& payloads_by_tape,
    int tau) {
  if (tau < 3) throw std::invalid_argument("tape bound must be at least 3");
  Configuration c;
  c.state = tm.initial_state();
  c.tapes = Eigen::MatrixXi::Constant(tau, tm.tape_count(), kBlank);
  c.heads = Eigen::VectorXi::Ones(tm.tape_count());
  for (const auto& [tape_id, bits] : payloads_by_tape) {
    if (tape_id < 1 || tape_id > tm.tape_count())
      throw std::invalid_argument("payload tape id out of range");
    if (static_cast<int>(bits.size()) + 2 > tau)
      throw std::invalid_argument("payload of " + std::to_string(bits.size()) +
                                  " bits does not fit tape bound " +
                                  std::to_string(tau));
    for (size_t j = 0; j < bits.size(); ++j) {
      if (bits[j] != 0 && bits[j] != 1 && bits[j] != -1)
        throw std::invalid_argument("payload entries must be bits or +-1");
      c.tapes(static_cast<int>(j) + 1, tape_id - 1) = bits[j] > 0 ? 1 : -1;
    }
  }
  return c;
}

}  // namespace gradtrace
