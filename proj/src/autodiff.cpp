#include "gradtrace/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gradtrace::autodiff {

namespace {

// Piecewise-linear interpolation through (xs, vs), flat outside.
double cutoff_value(const Vec& xs, const Vec& vs, double x) {
  const int n = static_cast<int>(xs.size());
  if (x <= xs[0]) return vs[0];
  if (x >= xs[n - 1]) return vs[n - 1];
  int i = 0;
  while (x >= xs[i + 1]) ++i;
  const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return (1.0 - t) * vs[i] + t * vs[i + 1];
}

// Slope of the segment to the right of x (zero on the flat tails).
double cutoff_right_slope(const Vec& xs, const Vec& vs, double x) {
  const int n = static_cast<int>(xs.size());
  if (x < xs[0] || x >= xs[n - 1]) return 0.0;
  int i = 0;
  while (x >= xs[i + 1]) ++i;
  return (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i]);
}

// Slope of the segment to the left of x.
double cutoff_left_slope(const Vec& xs, const Vec& vs, double x) {
  const int n = static_cast<int>(xs.size());
  if (x <= xs[0] || x > xs[n - 1]) return 0.0;
  int i = 0;
  while (i + 2 < n && x > xs[i + 1]) ++i;
  return (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i]);
}

Vec threshold_to_symbols(const Vec& cells) {
  Vec out(cells.size());
  for (int i = 0; i < cells.size(); ++i) out[i] = cells[i] > 0.0 ? 1.0 : -1.0;
  return out;
}

}  // namespace

int Graph::append(Node n) {
  for (int c : n.children) {
    if (c < 0 || c >= size())
      throw std::invalid_argument("child node id out of range");
  }
  nodes_.push_back(std::move(n));
  return size() - 1;
}

int Graph::input(int dim, std::string label) {
  Node n;
  n.op = Op::kInput;
  n.dim = dim;
  n.label = std::move(label);
  return append(std::move(n));
}

int Graph::param(Block block, int dim, std::string label) {
  if (param_nodes_.count(block))
    throw std::invalid_argument("parameter block registered twice");
  Node n;
  n.op = Op::kParam;
  n.dim = dim;
  n.label = std::move(label);
  const int id = append(std::move(n));
  param_nodes_[block] = id;
  return id;
}

int Graph::constant(Vec v, std::string label) {
  Node n;
  n.op = Op::kConstant;
  n.dim = static_cast<int>(v.size());
  n.bias = std::move(v);
  n.label = std::move(label);
  return append(std::move(n));
}

int Graph::linear(std::vector<int> children, std::vector<SpMat> mats, Vec bias,
                  std::string label) {
  if (children.size() != mats.size())
    throw std::invalid_argument("one matrix per child required");
  Node n;
  n.op = Op::kLinear;
  n.dim = static_cast<int>(bias.size());
  for (size_t k = 0; k < mats.size(); ++k) {
    if (mats[k].rows() != n.dim || mats[k].cols() != nodes_[children[k]].dim)
      throw std::invalid_argument("linear map shape mismatch");
  }
  n.children = std::move(children);
  n.mats = std::move(mats);
  n.bias = std::move(bias);
  n.label = std::move(label);
  return append(std::move(n));
}

int Graph::relu(int child) {
  Node n;
  n.op = Op::kRelu;
  n.children = {child};
  n.dim = nodes_[child].dim;
  n.label = "relu";
  return append(std::move(n));
}

int Graph::sqrt_of(int child) {
  if (nodes_[child].dim != 1)
    throw std::invalid_argument("sqrt expects a scalar");
  Node n;
  n.op = Op::kSqrt;
  n.children = {child};
  n.dim = 1;
  n.label = "sqrt";
  return append(std::move(n));
}

int Graph::product(int a, int b) {
  const int da = nodes_[a].dim, db = nodes_[b].dim;
  if (da != db && da != 1 && db != 1)
    throw std::invalid_argument("product dims incompatible");
  Node n;
  n.op = Op::kProduct;
  n.children = {a, b};
  n.dim = std::max(da, db);
  n.label = "product";
  return append(std::move(n));
}

int Graph::square_norm(int child) {
  Node n;
  n.op = Op::kSquareNorm;
  n.children = {child};
  n.dim = 1;
  n.label = "square_norm";
  return append(std::move(n));
}

int Graph::cutoff(int child, Vec xs, Vec vs, std::string label) {
  if (nodes_[child].dim != 1)
    throw std::invalid_argument("cutoff expects a scalar");
  if (xs.size() != vs.size() || xs.size() < 2)
    throw std::invalid_argument("cutoff needs matching knot lists");
  for (int i = 0; i + 1 < xs.size(); ++i)
    if (!(xs[i] < xs[i + 1]))
      throw std::invalid_argument("cutoff knots must increase");
  Node n;
  n.op = Op::kCutoff;
  n.children = {child};
  n.dim = 1;
  n.cut_xs = std::move(xs);
  n.cut_vs = std::move(vs);
  n.label = std::move(label);
  return append(std::move(n));
}

int Graph::stop_grad(int child) {
  Node n;
  n.op = Op::kStopGrad;
  n.children = {child};
  n.dim = nodes_[child].dim;
  n.label = "stop_grad";
  return append(std::move(n));
}

int Graph::quantize_encode(int child, FloatCodec codec) {
  Node n;
  n.op = Op::kQuantizeEncode;
  n.children = {child};
  n.dim = nodes_[child].dim * codec.word_length();
  n.codec = codec;
  n.label = "quantize";
  return append(std::move(n));
}

int Graph::quantize_decode(int child, FloatCodec codec, int count) {
  if (nodes_[child].dim != count * codec.word_length())
    throw std::invalid_argument("decode region size mismatch");
  Node n;
  n.op = Op::kQuantizeDecode;
  n.children = {child};
  n.dim = count;
  n.codec = codec;
  n.decode_count = count;
  n.label = "dequantize";
  return append(std::move(n));
}

int Graph::primary_call(int theta, int x,
                        std::function<Vec(const Vec&, const Vec&)> fn,
                        int out_dim) {
  Node n;
  n.op = Op::kPrimaryCall;
  n.children = {theta, x};
  n.dim = out_dim;
  n.call2 = std::move(fn);
  n.label = "primary";
  return append(std::move(n));
}

int Graph::perp(int child, std::function<Vec(const Vec&)> fn) {
  Node n;
  n.op = Op::kPerp;
  n.children = {child};
  n.dim = nodes_[child].dim;
  n.call1 = std::move(fn);
  n.label = "perp";
  return append(std::move(n));
}

int Graph::param_node(Block block) const {
  auto it = param_nodes_.find(block);
  if (it == param_nodes_.end())
    throw std::invalid_argument("parameter block not registered");
  return it->second;
}

int Graph::param_dim(Block block) const {
  return nodes_[param_node(block)].dim;
}

std::vector<Vec> Graph::forward(const Env& env) const {
  std::vector<Vec> values(size());
  for (int i = 0; i < size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::kInput: {
        auto it = env.inputs.find(i);
        if (it == env.inputs.end())
          throw std::invalid_argument("missing input '" + n.label + "'");
        values[i] = it->second;
        break;
      }
      case Op::kParam: {
        Block block = Block::kSimplex;
        for (const auto& [b, id] : param_nodes_)
          if (id == i) block = b;
        auto it = env.params.find(block);
        if (it == env.params.end())
          throw std::invalid_argument("missing parameter block '" + n.label +
                                      "'");
        values[i] = it->second;
        break;
      }
      case Op::kConstant:
        values[i] = n.bias;
        break;
      case Op::kLinear: {
        Vec v = n.bias;
        for (size_t k = 0; k < n.children.size(); ++k)
          v += n.mats[k] * values[n.children[k]];
        values[i] = std::move(v);
        break;
      }
      case Op::kRelu:
        values[i] = values[n.children[0]].cwiseMax(0.0);
        break;
      case Op::kSqrt: {
        const double x = values[n.children[0]][0];
        if (!(x >= 0.0)) throw std::domain_error("sqrt of a negative value");
        values[i] = Vec::Constant(1, std::sqrt(x));
        break;
      }
      case Op::kProduct: {
        const Vec& a = values[n.children[0]];
        const Vec& b = values[n.children[1]];
        if (a.size() == b.size())
          values[i] = a.cwiseProduct(b);
        else if (a.size() == 1)
          values[i] = a[0] * b;
        else
          values[i] = b[0] * a;
        break;
      }
      case Op::kSquareNorm:
        values[i] = Vec::Constant(1, values[n.children[0]].squaredNorm());
        break;
      case Op::kCutoff:
        values[i] = Vec::Constant(
            1, cutoff_value(n.cut_xs, n.cut_vs, values[n.children[0]][0]));
        break;
      case Op::kStopGrad:
        values[i] = values[n.children[0]];
        break;
      case Op::kQuantizeEncode: {
        const Vec& x = values[n.children[0]];
        values[i] = n.codec.quantize_vector(x).cast<double>();
        break;
      }
      case Op::kQuantizeDecode: {
        const Eigen::VectorXi word =
            threshold_to_symbols(values[n.children[0]]).cast<int>();
        Vec out(n.decode_count);
        const int w = n.codec.word_length();
        for (int k = 0; k < n.decode_count; ++k) {
          double x;
          try {
            x = n.codec.dequantize(word.segment(k * w, w));
          } catch (const CodecError&) {
            x = 0.0;  // undefined mid-run readout
          }
          out[k] = x;
        }
        values[i] = std::move(out);
        break;
      }
      case Op::kPrimaryCall:
        values[i] = n.call2(values[n.children[0]], values[n.children[1]]);
        break;
      case Op::kPerp:
        values[i] = n.call1(values[n.children[0]]);
        break;
    }
    if (values[i].size() != n.dim)
      throw std::logic_error("node '" + n.label + "' produced dim " +
                             std::to_string(values[i].size()) + ", declared " +
                             std::to_string(n.dim));
  }
  return values;
}

Vec Graph::eval(const Env& env) const {
  if (output_ < 0) throw std::logic_error("graph has no output");
  return forward(env)[output_];
}

Vec Graph::grad(Block block, const Env& env,
                const std::optional<Vec>& seed) const {
  if (output_ < 0) throw std::logic_error("graph has no output");
  const std::vector<Vec> values = forward(env);
  std::vector<Vec> adj(size());
  for (int i = 0; i < size(); ++i) adj[i] = Vec::Zero(nodes_[i].dim);
  adj[output_] = seed.value_or(Vec::Ones(nodes_[output_].dim));
  if (adj[output_].size() != nodes_[output_].dim)
    throw std::invalid_argument("seed dimension mismatch");

  for (int i = size() - 1; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (adj[i].isZero(0.0)) continue;
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
      case Op::kConstant:
      case Op::kStopGrad:       // severed on purpose
      case Op::kQuantizeEncode:  // never differentiated
      case Op::kQuantizeDecode:
      case Op::kPerp:
        break;
      case Op::kLinear:
        for (size_t k = 0; k < n.children.size(); ++k)
          adj[n.children[k]] += n.mats[k].transpose() * adj[i];
        break;
      case Op::kRelu: {
        const Vec& pre = values[n.children[0]];
        Vec g = adj[i];
        for (int j = 0; j < g.size(); ++j)
          if (pre[j] < 0.0) g[j] = 0.0;  // right derivative at the kink
        adj[n.children[0]] += g;
        break;
      }
      case Op::kSqrt:
        adj[n.children[0]] += adj[i] / (2.0 * values[i][0]);
        break;
      case Op::kProduct: {
        const Vec& a = values[n.children[0]];
        const Vec& b = values[n.children[1]];
        if (a.size() == b.size()) {
          adj[n.children[0]] += adj[i].cwiseProduct(b);
          adj[n.children[1]] += adj[i].cwiseProduct(a);
        } else if (a.size() == 1) {
          adj[n.children[0]] += Vec::Constant(1, adj[i].dot(b));
          adj[n.children[1]] += a[0] * adj[i];
        } else {
          adj[n.children[1]] += Vec::Constant(1, adj[i].dot(a));
          adj[n.children[0]] += b[0] * adj[i];
        }
        break;
      }
      case Op::kSquareNorm:
        adj[n.children[0]] += 2.0 * adj[i][0] * values[n.children[0]];
        break;
      case Op::kCutoff:
        adj[n.children[0]] +=
            adj[i] * cutoff_right_slope(n.cut_xs, n.cut_vs,
                                        values[n.children[0]][0]);
        break;
      case Op::kPrimaryCall: {
        // Gradients reach the primary network only with a zero seed; resolve
        // anything else by numeric differentiation of the opaque call.
        if (adj[i].isZero(0.0)) break;
        const double h = 1e-6;
        for (int c = 0; c < 2; ++c) {
          const int child = n.children[c];
          Vec base0 = values[n.children[0]], base1 = values[n.children[1]];
          Vec g = Vec::Zero(nodes_[child].dim);
          for (int j = 0; j < nodes_[child].dim; ++j) {
            Vec p0 = base0, p1 = base1;
            Vec m0 = base0, m1 = base1;
            (c == 0 ? p0[j] : p1[j]) += h;
            (c == 0 ? m0[j] : m1[j]) -= h;
            g[j] = adj[i].dot(n.call2(p0, p1) - n.call2(m0, m1)) / (2.0 * h);
          }
          adj[child] += g;
        }
        break;
      }
    }
  }

  const int pid = param_node(block);
  return adj[pid];
}

double Graph::dir_deriv_block(Block block, const Vec& direction,
                              const Env& env) const {
  if (output_ < 0) throw std::logic_error("graph has no output");
  if (nodes_[output_].dim != 1)
    throw std::logic_error("directional derivative needs a scalar output");
  const std::vector<Vec> values = forward(env);
  const int pid = param_node(block);
  if (direction.size() != nodes_[pid].dim)
    throw std::invalid_argument("direction dimension mismatch");

  std::vector<Vec> tan(size());
  for (int i = 0; i < size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::kParam && i == pid) {
      tan[i] = direction;
      continue;
    }
    tan[i] = Vec::Zero(n.dim);
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
      case Op::kConstant:
      case Op::kStopGrad:
      case Op::kQuantizeEncode:
      case Op::kQuantizeDecode:
      case Op::kPerp:
        break;  // zero tangent
      case Op::kLinear:
        for (size_t k = 0; k < n.children.size(); ++k)
          tan[i] += n.mats[k] * tan[n.children[k]];
        break;
      case Op::kRelu: {
        const Vec& pre = values[n.children[0]];
        const Vec& t = tan[n.children[0]];
        for (int j = 0; j < n.dim; ++j) {
          if (pre[j] > 0.0)
            tan[i][j] = t[j];
          else if (pre[j] == 0.0)
            tan[i][j] = std::max(t[j], 0.0);  // one-sided at the kink
        }
        break;
      }
      case Op::kSqrt:
        tan[i][0] = tan[n.children[0]][0] / (2.0 * values[i][0]);
        break;
      case Op::kProduct: {
        const Vec& a = values[n.children[0]];
        const Vec& b = values[n.children[1]];
        const Vec& ta = tan[n.children[0]];
        const Vec& tb = tan[n.children[1]];
        if (a.size() == b.size())
          tan[i] = ta.cwiseProduct(b) + a.cwiseProduct(tb);
        else if (a.size() == 1)
          tan[i] = ta[0] * b + a[0] * tb;
        else
          tan[i] = tb[0] * a + b[0] * ta;
        break;
      }
      case Op::kSquareNorm:
        tan[i][0] = 2.0 * values[n.children[0]].dot(tan[n.children[0]]);
        break;
      case Op::kCutoff: {
        const double t = tan[n.children[0]][0];
        const double x = values[n.children[0]][0];
        if (t > 0.0)
          tan[i][0] = t * cutoff_right_slope(n.cut_xs, n.cut_vs, x);
        else if (t < 0.0)
          tan[i][0] = t * cutoff_left_slope(n.cut_xs, n.cut_vs, x);
        break;
      }
      case Op::kPrimaryCall: {
        if (tan[n.children[0]].isZero(0.0) && tan[n.children[1]].isZero(0.0))
          break;
        const double h = 1e-7;
        const Vec plus = n.call2(values[n.children[0]] + h * tan[n.children[0]],
                                 values[n.children[1]] + h * tan[n.children[1]]);
        tan[i] = (plus - values[i]) / h;
        break;
      }
    }
  }
  return tan[output_][0];
}

int Graph::extra_depth_at(int node) const {
  std::vector<int> depth(size(), 0);
  for (int i = 0; i <= node; ++i) {
    const Node& n = nodes_[i];
    int base = 0;
    for (int c : n.children) base = std::max(base, depth[c]);
    int cost = 0;
    switch (n.op) {
      case Op::kRelu:
      case Op::kSqrt:
      case Op::kProduct:
      case Op::kSquareNorm:
      case Op::kCutoff:
        cost = 1;
        break;
      case Op::kPerp:
        cost = 5;  // switch, square norm, ratio, and two normalization layers
        break;
      default:
        break;  // affine maps fuse with the following nonlinearity
    }
    depth[i] = base + cost;
  }
  return depth[node];
}

int Graph::extra_depth() const {
  return output_ >= 0 ? extra_depth_at(output_) : 0;
}

std::string Graph::dump() const {
  std::ostringstream os;
  for (int i = 0; i < size(); ++i) {
    const Node& n = nodes_[i];
    os << i << ": " << op_name(n.op) << " '" << n.label << "' dim=" << n.dim;
    if (!n.children.empty()) {
      os << " <-";
      for (int c : n.children) os << " " << c;
    }
    if (i == output_) os << "  [output]";
    os << "\n";
  }
  return os.str();
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kConstant: return "constant";
    case Op::kLinear: return "linear";
    case Op::kRelu: return "relu";
    case Op::kSqrt: return "sqrt";
    case Op::kProduct: return "product";
    case Op::kSquareNorm: return "square_norm";
    case Op::kCutoff: return "cutoff";
    case Op::kStopGrad: return "stop_grad";
    case Op::kQuantizeEncode: return "quantize";
    case Op::kQuantizeDecode: return "dequantize";
    case Op::kPrimaryCall: return "primary_call";
    case Op::kPerp: return "perp";
  }
  return "?";
}

const char* block_name(Block block) {
  switch (block) {
    case Block::kSimplex: return "s";
    case Block::kTape: return "T";
    case Block::kHeads: return "H";
    case Block::kLabels: return "z";
  }
  return "?";
}

}  // namespace gradtrace::autodiff
