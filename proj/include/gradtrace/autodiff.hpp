#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gradtrace/codec.hpp"

namespace gradtrace::autodiff {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Trainable blocks of the extended network.
enum class Block { kSimplex, kTape, kHeads, kLabels };

enum class Op {
  kInput,
  kParam,
  kConstant,
  kLinear,       // bias + sum of mats[k] * child_k
  kRelu,
  kSqrt,
  kProduct,      // elementwise; scalar children broadcast
  kSquareNorm,
  kCutoff,       // piecewise-linear scalar function, flat outside the knots
  kStopGrad,
  kQuantizeEncode,   // floats -> +-1 word, never differentiated
  kQuantizeDecode,   // +-1 cells -> floats, never differentiated
  kPrimaryCall,  // opaque (theta, x) -> prediction
  kPerp,         // opaque unit vector orthogonal to the child
};

struct Node {
  Op op;
  std::vector<int> children;
  int dim = 0;
  std::string label;

  std::vector<SpMat> mats;
  Vec bias;
  Vec cut_xs, cut_vs;
  FloatCodec codec = FloatCodec::passthrough64();
  int decode_count = 0;
  std::function<Vec(const Vec&, const Vec&)> call2;
  std::function<Vec(const Vec&)> call1;
};

struct Env {
  std::map<int, Vec> inputs;
  std::map<Block, Vec> params;
};

/// Fixed computation graph over small dense vectors. Nodes are appended in
/// topological order; evaluation and differentiation never mutate the graph,
/// so a built graph is safe to share across threads.
class Graph {
 public:
  int input(int dim, std::string label);
  int param(Block block, int dim, std::string label);
  int constant(Vec v, std::string label = "const");
  int linear(std::vector<int> children, std::vector<SpMat> mats, Vec bias,
             std::string label = "linear");
  int relu(int child);
  int sqrt_of(int child);
  int product(int a, int b);
  int square_norm(int child);
  int cutoff(int child, Vec xs, Vec vs, std::string label = "cutoff");
  int stop_grad(int child);
  int quantize_encode(int child, FloatCodec codec);
  int quantize_decode(int child, FloatCodec codec, int count);
  int primary_call(int theta, int x,
                   std::function<Vec(const Vec&, const Vec&)> fn, int out_dim);
  int perp(int child, std::function<Vec(const Vec&)> fn);

  void set_output(int node) { output_ = node; }
  int output() const { return output_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int i) const { return nodes_[i]; }
  int param_node(Block block) const;
  int param_dim(Block block) const;

  /// Forward values for every node.
  std::vector<Vec> forward(const Env& env) const;
  Vec eval(const Env& env) const;

  /// Reverse-mode gradient of seed . output with respect to a block.
  /// Stop-gradient and quantization edges contribute nothing; an unreachable
  /// block yields zeros.
  Vec grad(Block block, const Env& env,
           const std::optional<Vec>& seed = std::nullopt) const;

  /// One-sided directional derivative of the scalar output when the block
  /// moves along `direction`. Exact for the piecewise-linear nodes (kinks
  /// follow the tangent direction).
  double dir_deriv_block(Block block, const Vec& direction,
                         const Env& env) const;

  /// Layer count of everything outside the primary network, following the
  /// convention that affine maps fuse with the following nonlinearity.
  int extra_depth() const;
  int extra_depth_at(int node) const;

  std::string dump() const;

 private:
  int append(Node n);
  std::vector<Node> nodes_;
  std::map<Block, int> param_nodes_;
  int output_ = -1;
};

const char* op_name(Op op);
const char* block_name(Block block);

}  // namespace gradtrace::autodiff
