#include "gradtrace/graph_tracer.hpp"

#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace gradtrace {

namespace {

std::string config_key(const Configuration& c) {
  std::string key = std::to_string(c.state);
  for (int i = 0; i < c.heads.size(); ++i)
    key += ":" + std::to_string(c.heads[i]);
  key.push_back('|');
  for (int i = 0; i < c.tapes.cols(); ++i)
    for (int r = 0; r < c.tapes.rows(); ++r)
      key.push_back(c.tapes(r, i) > 0 ? '1' : '0');
  return key;
}

}  // namespace

int StateGraph::find(const Configuration& c) const {
  for (int v = 0; v < size(); ++v)
    if (vertices[v] == c) return v;
  return -1;
}

StateGraph build_graph(const TuringMachine& tm, int tau,
                       const std::vector<Configuration>& inputs,
                       GraphMode mode, int max_steps) {
  if (inputs.empty()) throw std::invalid_argument("no inputs given");
  StateGraph g;

  // Horizon from the admitted inputs; every input must halt under it.
  std::vector<ExecutionTrace> orbits;
  int max_kt = 0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    ExecutionTrace t = run(tm, inputs[i], max_steps);
    if (!t.halted)
      throw std::runtime_error("input " + std::to_string(i) +
                               " does not halt within " +
                               std::to_string(max_steps) + " steps");
    max_kt = std::max(max_kt, t.step_count);
    orbits.push_back(std::move(t));
  }
  g.horizon = max_kt + 1;

  std::unordered_map<std::string, int> index;
  auto intern = [&](const Configuration& c) {
    auto [it, fresh] = index.emplace(config_key(c), g.size());
    if (fresh) {
      g.vertices.push_back(c);
      g.successor.push_back(-1);
      g.steps_to_halt.push_back(g.horizon);
    }
    return it->second;
  };

  if (mode == GraphMode::kReachable) {
    for (const ExecutionTrace& t : orbits) {
      const int kt = t.step_count;
      int prev = -1;
      for (size_t j = 0; j < t.configs.size(); ++j) {
        const int v = intern(t.configs[j]);
        g.steps_to_halt[v] = kt - static_cast<int>(j);
        if (prev >= 0) g.successor[prev] = v;
        prev = v;
      }
    }
  } else {
    const int d = tm.tape_count();
    const long cells = static_cast<long>(tau) * d;
    if (cells > 20)
      throw std::invalid_argument("full enumeration infeasible for this size");
    const long tape_combos = 1L << cells;
    long head_combos = 1;
    for (int i = 0; i < d; ++i) head_combos *= tau;

    for (int q = 0; q < tm.state_count(); ++q) {
      for (long tc = 0; tc < tape_combos; ++tc) {
        Configuration c;
        c.state = q;
        c.tapes.resize(tau, d);
        for (long bit = 0; bit < cells; ++bit)
          c.tapes(bit % tau, static_cast<int>(bit / tau)) =
              (tc >> bit) & 1 ? 1 : -1;
        for (long hc = 0; hc < head_combos; ++hc) {
          long rest = hc;
          c.heads.resize(d);
          for (int i = 0; i < d; ++i) {
            c.heads[i] = static_cast<int>(rest % tau);
            rest /= tau;
          }
          intern(c);
        }
      }
    }
    for (int v = 0; v < g.size(); ++v) {
      if (!tm.is_accepting(g.vertices[v].state)) {
        try {
          auto it = index.find(config_key(step(tm, g.vertices[v])));
          if (it != index.end()) g.successor[v] = it->second;
        } catch (const TapeBoundViolation&) {
        }
      }
      try {
        ExecutionTrace t = run(tm, g.vertices[v], g.horizon);
        g.steps_to_halt[v] = t.halted ? t.step_count : g.horizon;
      } catch (const TapeBoundViolation&) {
        g.steps_to_halt[v] = g.horizon;  // leaves the admitted region
      }
    }
  }

  for (const Configuration& c : inputs) g.input_vertices.push_back(g.find(c));

  // Successor depth bookkeeping must be consistent.
  for (int v = 0; v < g.size(); ++v) {
    const int w = g.successor[v];
    if (w >= 0 && g.steps_to_halt[v] < g.horizon &&
        g.steps_to_halt[w] != g.steps_to_halt[v] - 1)
      throw std::logic_error("inconsistent steps-to-halt along an edge");
  }
  return g;
}

Vec default_ladder(int horizon) {
  Vec w(horizon + 1);
  for (int j = 0; j <= horizon; ++j) w[j] = 1.0 + j;
  return w;
}

WeightAssignment assign_weights(const StateGraph& g, const Vec& ladder) {
  if (ladder.size() != g.horizon + 1)
    throw std::invalid_argument("ladder must have horizon+1 entries");
  for (int j = 0; j + 1 < ladder.size(); ++j)
    if (!(ladder[j] < ladder[j + 1]))
      throw std::invalid_argument("ladder must be strictly increasing");

  WeightAssignment wa{&g, ladder};

  // Order conditions on the built graph: along every edge the step is
  // preferred over standing still and over stepping backwards; the top value
  // dominates everything visited below the horizon.
  for (int v = 0; v < g.size(); ++v) {
    const int w = g.successor[v];
    if (w < 0) continue;
    if (!(wa.vertex_weight(v) > wa.pair_weight(v, w)))
      throw std::logic_error("edge weight fails vertex > pair");
    if (!(wa.pair_weight(v, w) > wa.vertex_weight(w)))
      throw std::logic_error("edge weight fails pair > next vertex");
    const int x = g.successor[w];
    if (x >= 0 && !(wa.pair_weight(v, w) > wa.pair_weight(w, x)))
      throw std::logic_error("consecutive pair weights out of order");
    if (g.steps_to_halt[v] < g.horizon && !(wa.top() > wa.vertex_weight(v)))
      throw std::logic_error("top weight does not dominate");
  }
  return wa;
}

SimplexLoss build_loss(const WeightAssignment& wa) {
  const StateGraph& g = *wa.graph;
  const int m = g.size();
  if (m < 3)
    throw std::invalid_argument("graph loss needs at least 3 vertices");

  SimplexLoss loss;
  loss.dim = m;
  for (int v = 0; v < m; ++v) {
    BasisFunction f;
    f.add(1.0, hat(v, 0.5, m));
    loss.add(wa.vertex_weight(v), std::move(f));
  }
  for (int v = 0; v < m; ++v)
    for (int w = v + 1; w < m; ++w)
      loss.add(wa.pair_weight(v, w), edge_bump(v, w, m));
  loss.compile();
  return loss;
}

GraphTrace trace(const SimplexLoss& loss, const WeightAssignment& wa, int v0,
                 StepRule rule, int max_iters) {
  const int m = loss.dim;
  if (v0 < 0 || v0 >= m) throw std::invalid_argument("start vertex out of range");
  if (rule == StepRule::kLineSearch) {
    // Line search relies on the strict weight chain along edges; re-check it.
    const StateGraph& g = *wa.graph;
    for (int v = 0; v < g.size(); ++v) {
      const int w = g.successor[v];
      if (w >= 0 && !(wa.vertex_weight(v) > wa.pair_weight(v, w) &&
                      wa.pair_weight(v, w) > wa.vertex_weight(w)))
        throw std::logic_error("weights do not support a line search");
    }
  }

  auto f = [&loss](const Vec& x) { return loss.value(x); };
  GraphTrace out;
  int v = v0;
  out.vertices.push_back(v);
  out.loss_values.push_back(loss.value(simplex_vertex(v, m)));

  for (int it = 0; it < max_iters; ++it) {
    const int w = corner_argmin(f, v, 0.5, m);
    if (w == v) {
      out.halted = true;
      break;
    }
    if (rule == StepRule::kLineSearch) {
      const double at_v = loss.value(simplex_vertex(v, m));
      const double at_mid = loss.value(edge_point(v, w, 0.5, m));
      const double at_w = loss.value(simplex_vertex(w, m));
      if (at_mid < at_w || at_w >= at_v) {
        std::ostringstream os;
        os << "line search does not land on a vertex: values " << at_v << " "
           << at_mid << " " << at_w << " from vertex " << v << " toward " << w;
        throw std::logic_error(os.str());
      }
    }
    v = w;
    out.vertices.push_back(v);
    out.loss_values.push_back(loss.value(simplex_vertex(v, m)));
  }
  return out;
}

std::string trace_to_jsonl(const GraphTrace& t) {
  std::ostringstream os;
  for (size_t k = 0; k < t.vertices.size(); ++k) {
    nlohmann::json line;
    line["step"] = k;
    line["vertex"] = t.vertices[k];
    line["loss"] = t.loss_values[k];
    os << line.dump() << "\n";
  }
  return os.str();
}

}  // namespace gradtrace
