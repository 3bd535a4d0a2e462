#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

// Reverse-mode automatic differentiation over dense row-major double
// tensors. A Graph is a one-shot tape: build the forward computation,
// call backward() on a scalar loss, read gradients off the leaves.
// Nodes are immutable once created, so finished graphs can be read
// from multiple threads.

namespace temppnet::ad {

using Shape = std::vector<int>;

int shape_size(const Shape& s);
std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A named learnable array. Gradients accumulate across backward passes
// until zero_grad().
struct Param {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, Shape s)
      : name(std::move(n)), shape(std::move(s)),
        value(shape_size(shape), 0.0), grad(shape_size(shape), 0.0) {}

  int size() const { return static_cast<int>(value.size()); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

enum class Op {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kAffine,     // a*x + b elementwise
  kSquare,
  kExp,
  kLog,
  kSigmoid,
  kTanh,
  kLeakyRelu,  // slope in attr_a
  kClamp,      // [attr_a, attr_b]
  kSum,
  kMaxAxis,    // axis in attr_i0, 1-D -> scalar, 2-D axis 1 -> per-row
  kMinAxis,
  kMatmul,
  kMatvec,
  kDot,
  kConcat,     // 1-D
  kHConcat,    // 2-D along columns
  kCol,        // column slice, attr_i0 = column
  kAt,         // 1-D index, attr_i0 = index
  kConv1d,     // attr_i0 = kernel size
  kMaxPool1d,  // window 2, stride 2
  kBatchNorm,  // attr_i0 = layer id, attr_i1 = 1 if training
  kPairSqDist,
  kTimeEncode,
};

const char* op_name(Op op);

// Frozen normalization statistics, one entry per channel.
struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;
};

// Per-channel batch statistics recorded by a training-mode batchnorm
// node, keyed by the caller-supplied layer id. The trainer folds these
// into running statistics in a deterministic order.
struct BatchNormObservation {
  int layer_id = 0;
  std::vector<double> mean;
  std::vector<double> var_unbiased;
};

struct Node {
  Op op = Op::kLeaf;
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;      // allocated lazily during backward
  std::vector<int> parents;
  bool needs = false;            // gradient reaches a requires-grad leaf
  double attr_a = 0.0;
  double attr_b = 0.0;
  int attr_i0 = 0;
  int attr_i1 = 0;
  std::vector<double> aux;       // saved forward values (im2col, bn stats, ...)
  std::vector<int> iaux;         // saved indices (argmax routing, ...)
  Param* param = nullptr;        // leaf bound to an external parameter
};

class Graph;

// Handle to a node on a graph.
class Value {
 public:
  Value() = default;
  bool valid() const { return g_ != nullptr; }
  const Shape& shape() const;
  const std::vector<double>& data() const;
  std::vector<double> grad() const;  // zeros if backward never reached it
  double scalar() const;
  int id() const { return id_; }
  Graph* graph() const { return g_; }

 private:
  friend class Graph;
  Value(Graph* g, int id) : g_(g), id_(id) {}
  Graph* g_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Value constant(Shape s, std::vector<double> v);
  Value scalar_const(double v);
  Value input(const Shape& s, const double* data);  // copied, no grad
  Value param(Param& p);  // gradient lands in p.grad after backward()

  // Elementwise.
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value affine(Value x, double a, double b);
  Value square(Value x);
  Value exp(Value x);
  Value log(Value x);
  Value sigmoid(Value x);
  Value tanh(Value x);
  Value leaky_relu(Value x, double slope = 0.01);
  Value clamp(Value x, double lo, double hi);

  // Reductions.
  Value sum(Value x);
  Value max_over_axis(Value x, int axis = 0);
  Value min_over_axis(Value x, int axis = 0);

  // Linear algebra.
  Value matmul(Value a, Value b);
  Value matvec(Value a, Value x);
  Value dot(Value a, Value b);

  // Structure.
  Value concat(const std::vector<Value>& xs);
  Value hconcat(const std::vector<Value>& xs);
  Value col(Value x, int j);
  Value at(Value x, int i);

  // Neural-net ops.
  Value conv1d(Value x, Value w, Value b, int kernel);
  Value maxpool1d(Value x);
  // Training mode (frozen == nullptr) normalizes with batch statistics
  // (variance floor 1e-5) and records a BatchNormObservation; eval mode
  // is an affine map using the frozen statistics.
  Value batchnorm1d(Value x, Value gamma, Value beta, int layer_id,
                    const BatchNormStats* frozen);
  Value pairwise_sqdist(Value p, Value h);
  Value time_encode(Value omega, Value theta, Value t);

  // Backward from a scalar loss. Every parameter leaf adds its gradient
  // into Param::grad. May be called once per graph.
  void backward(Value loss);

  // Clears node gradients so another backward can run on the same graph
  // (external Param::grad buffers are untouched).
  void clear_grads();

  // With deferral on, backward() records (param, gradient) pairs instead
  // of touching Param::grad, so concurrent graphs can run backward and a
  // single thread can apply the results in a fixed order.
  void set_defer_param_grads(bool defer) { defer_param_grads_ = defer; }
  using DeferredGrads = std::vector<std::pair<Param*, std::vector<double>>>;
  DeferredGrads take_deferred_grads() { return std::move(deferred_); }
  static void apply_deferred_grads(DeferredGrads& grads);

  const std::vector<BatchNormObservation>& batchnorm_observations() const {
    return bn_obs_;
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  const Node& node(int id) const { return *nodes_[id]; }

  static constexpr double kVarianceFloor = 1e-5;

 private:
  friend class Value;
  Node& mut(int id) { return *nodes_[id]; }
  int push(std::unique_ptr<Node> n);
  Value make(Op op, Shape shape, std::vector<int> parents);
  void check_same_shape(const char* op, const Value& a, const Value& b) const;
  void backward_node(int id);

  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<BatchNormObservation> bn_obs_;
  DeferredGrads deferred_;
  bool defer_param_grads_ = false;
  bool backward_done_ = false;
};

// One GRU step h' = GRU(h_prev, x), composed from graph primitives so
// gradients flow through without a dedicated backward rule.
struct GruWeights {
  Param* w_reset;   // [hidden, input]
  Param* w_update;
  Param* w_cand;
  Param* u_reset;   // [hidden, hidden]
  Param* u_update;
  Param* u_cand;
  Param* b_reset;   // [hidden]
  Param* b_update;
  Param* b_cand_in;
  Param* b_cand_hid;
};

Value gru_cell(Graph& g, Value h_prev, Value x, const GruWeights& w);

}  // namespace temppnet::ad
