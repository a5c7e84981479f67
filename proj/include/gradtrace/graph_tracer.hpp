#pragma once

#include <string>
#include <vector>

#include "gradtrace/simplex.hpp"
#include "gradtrace/turing.hpp"

namespace gradtrace {

enum class GraphMode { kReachable, kFull };
enum class StepRule { kUnit, kLineSearch };

/// Finite execution graph: one vertex per machine configuration, one edge per
/// computational step, and for every vertex the number of steps it needs to
/// halt (capped at the horizon).
struct StateGraph {
  std::vector<Configuration> vertices;
  std::vector<int> successor;      // -1 for halting / bound-violating vertices
  std::vector<int> steps_to_halt;  // k(v) in [0, horizon]
  int horizon = 0;                 // K; inputs halt within K-1 steps
  std::vector<int> input_vertices;

  int size() const { return static_cast<int>(vertices.size()); }
  bool is_edge(int v, int w) const { return successor[v] == w; }
  int find(const Configuration& c) const;
};

/// StateGraph over the forward orbits of `inputs` (kReachable) or over every
/// state within the tape bound (kFull; feasible only for tiny machines).
/// Throws if an input fails to halt within max_steps.
StateGraph build_graph(const TuringMachine& tm, int tau,
                       const std::vector<Configuration>& inputs,
                       GraphMode mode, int max_steps = 100000);

/// Vertex and pair weights derived from a strictly increasing ladder
/// W_0 < ... < W_K: vertices get W_{k(v)}, edges the midpoint of their
/// endpoint weights, non-edges the top value B = W_K.
struct WeightAssignment {
  const StateGraph* graph = nullptr;
  Vec ladder;

  double vertex_weight(int v) const { return ladder[graph->steps_to_halt[v]]; }
  double pair_weight(int v, int w) const {
    if (graph->is_edge(v, w) || graph->is_edge(w, v))
      return 0.5 * (vertex_weight(v) + vertex_weight(w));
    return ladder[ladder.size() - 1];
  }
  double top() const { return ladder[ladder.size() - 1]; }
};

Vec default_ladder(int horizon);  // W_j = 1 + j

/// Validates the ladder and the edge-weight order conditions on the built
/// graph. Vertices at the horizon share the top value; they are never visited
/// by an admitted trace.
WeightAssignment assign_weights(const StateGraph& g, const Vec& ladder);

/// Interpolating loss over R^|V|: half-scale hats carry vertex weights, edge
/// bumps carry pair weights for every vertex pair.
SimplexLoss build_loss(const WeightAssignment& wa);

struct GraphTrace {
  std::vector<int> vertices;
  std::vector<double> loss_values;
  bool halted = false;
};

/// Conditional-gradient descent on the graph loss from vertex v0. Iterates
/// remain vertices; the run stops at a fixpoint of the update or after
/// max_iters moves.
GraphTrace trace(const SimplexLoss& loss, const WeightAssignment& wa, int v0,
                 StepRule rule, int max_iters);

std::string trace_to_jsonl(const GraphTrace& t);

}  // namespace gradtrace
