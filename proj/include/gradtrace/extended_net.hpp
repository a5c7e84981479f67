#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gradtrace/autodiff.hpp"
#include "gradtrace/codec.hpp"
#include "gradtrace/graph_tracer.hpp"
#include "gradtrace/machine_io.hpp"
#include "gradtrace/simplex.hpp"
#include "gradtrace/tape_tracer.hpp"
#include "gradtrace/turing.hpp"

namespace gradtrace {

struct Dataset {
  Mat x;  // n x M
  Mat y;  // n x m
  double eps = 1.0;

  int samples() const { return static_cast<int>(x.rows()); }
  int input_dim() const { return static_cast<int>(x.cols()); }
  int label_dim() const { return static_cast<int>(y.cols()); }
  void validate() const;  // ||y||_F^2 >= eps
};

Vec flatten_rows(const Mat& m);

/// The model whose weights the machine computes: a pure map (theta, x) -> y.
struct PrimaryNetwork {
  int weight_dim = 0;
  int input_dim = 0;
  int output_dim = 0;
  std::function<Vec(const Vec& theta, const Vec& x_row)> eval_row;
};

PrimaryNetwork constant_network(int m);
PrimaryNetwork linear_network(int input_dim, int m);

/// Unit vector orthogonal to z, built from the first two flattened standard
/// basis vectors with a parallel-direction fallback. Guarded at z = 0 where
/// the downstream switch ignores the value anyway.
Vec f_perp(const Vec& z);

double psi_value(double t, double eps);  // 1 below eps/3, 0 above 2 eps/3
Vec s_init_value(const Vec& u, const Vec& z, double eps);

struct SwitchParams {
  double eps = 1.0;
  double lower = 0.0;   // branch switch threshold B_lower
  double upper = 0.0;   // B_upper
  double margin = 0.0;  // ramp margin, 2*lower + margin < 2*upper - margin
  double stop = 0.0;    // training stop threshold on the least-squares loss

  void validate() const;
};

double phi_value(double t, const SwitchParams& sp);  // 0 low, 1 high
Vec s_net_value(const Vec& f, const Vec& u, const SwitchParams& sp);

enum class Construction { kInternal, kExternal };

struct TrainStep {
  int index = 0;
  double loss = 0.0;
  double psi = 0.0;
  double phi = 0.0;
  int vertex = -1;
  Vec z;
  Vec tape;   // flattened full tape (external) or empty
  Vec heads;  // flattened head indicators or empty
};

struct TrainReport {
  std::vector<TrainStep> steps;
  int total_steps = 0;
  bool stopped = false;
  Vec final_output;  // flattened n x m
};

std::string train_report_to_json(const TrainReport& report);

struct AssembleOptions {
  Construction construction = Construction::kExternal;
  FloatCodec codec = FloatCodec::passthrough64();
  double gamma = 1.0;
  std::optional<TapeLossParams> tape_params;
  std::optional<SwitchParams> switches;
  int max_machine_steps = 100000;
};

/// Tape layout used to seed the machine: cell 1 of the mark and data tapes is
/// a constant start marker so the initial control vertex does not depend on
/// the data; labels are quantized right after it, inputs after the labels.
struct TapeLayout {
  int tau = 0;
  int z_bits = 0;
  int x_bits = 0;
  int mark_tape = -1;    // 0-based
  int data_tape = -1;    // 0-based
  int output_tape = -1;  // 0-based
  int output_start = 1;
  int payload_start = 2;  // first z bit cell

  std::vector<int> mark_bits() const;  // marker scheme as +-1 cells [1..]
};

TapeLayout plan_layout(const MachineFile& mf, const FloatCodec& codec,
                       const Dataset& data, int weight_dim);

/// Initial configuration with the given label values quantized into the data
/// tape (inputs x after them) and the mark scheme installed.
Configuration layout_initial_config(const TuringMachine& tm,
                                    const TapeLayout& layout,
                                    const FloatCodec& codec, const Mat& x,
                                    const Mat& z);

/// The assembled training wrapper: primary network, machine branch behind the
/// square-root lift, and the two switches, with trainable blocks s, T, H, z.
class ExtendedNetwork {
 public:
  static ExtendedNetwork assemble(const PrimaryNetwork& primary,
                                  const MachineFile& machine_file,
                                  const Dataset& data,
                                  const AssembleOptions& options);

  TrainReport train(int max_iters);

  /// Pure forward pass of the network output for the stored input x.
  Vec forward(const autodiff::Env& env) const;
  autodiff::Env initial_env() const;
  autodiff::Env current_env() const { return env_; }

  const autodiff::Graph& graph() const { return graph_; }
  int out_node() const { return out_node_; }
  int loss_node() const { return loss_node_; }
  const SwitchParams& switches() const { return switches_; }
  Construction construction() const { return construction_; }
  const Dataset& data() const { return data_; }
  const TapeLayout& layout() const { return layout_; }
  const FloatCodec& codec() const { return codec_; }

  /// Trainable dimension split (simplex, tape variables, labels).
  int simplex_dim() const;
  int tape_var_dim() const;
  int label_dim() const;
  int extra_depth() const { return graph_.extra_depth_at(out_node_); }

  // Construction internals for verification.
  const TapeLoss* tape_loss() const { return tape_loss_.get(); }
  const TuringMachine& traced_machine() const;
  const StateGraph* state_graph() const { return graph_state_.get(); }
  const SimplexLoss* graph_loss() const { return graph_loss_conv_.get(); }
  const Configuration& initial_config() const { return initial_config_; }
  int current_vertex() const;

 private:
  ExtendedNetwork() = default;
  void wire(const PrimaryNetwork& primary);
  int wire_machine_loss();  // returns the machine-loss scalar node

  autodiff::Graph graph_;
  autodiff::Env env_;
  int x_node_ = -1, y_node_ = -1;
  int out_node_ = -1, loss_node_ = -1;
  int psi_node_ = -1, phi_node_ = -1;
  int tape_full_node_ = -1;

  Construction construction_ = Construction::kExternal;
  FloatCodec codec_ = FloatCodec::passthrough64();
  Dataset data_;
  PrimaryNetwork primary_;
  TapeLayout layout_;
  SwitchParams switches_;
  double gamma_ = 1.0;

  std::unique_ptr<TuringMachine> machine_;  // tripled for kExternal
  std::unique_ptr<TapeLoss> tape_loss_;
  std::unique_ptr<StateGraph> graph_state_;
  std::unique_ptr<WeightAssignment> graph_weights_;
  std::unique_ptr<SimplexLoss> graph_loss_conv_;
  Vec ladder_;
  Configuration initial_config_;
  std::vector<int> writable_tapes_;
};

}  // namespace gradtrace
