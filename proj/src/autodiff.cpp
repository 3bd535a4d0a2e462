#include "temppnet/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace temppnet::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

bool is_scalar(const Shape& s) { return shape_size(s) == 1; }

}  // namespace

int shape_size(const Shape& s) {
  int n = 1;
  for (int e : s) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(s));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kAffine: return "affine";
    case Op::kSquare: return "square";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kClamp: return "clamp";
    case Op::kSum: return "sum";
    case Op::kMaxAxis: return "max_over_axis";
    case Op::kMinAxis: return "min_over_axis";
    case Op::kMatmul: return "matmul";
    case Op::kMatvec: return "matvec";
    case Op::kDot: return "dot";
    case Op::kConcat: return "concat";
    case Op::kHConcat: return "hconcat";
    case Op::kCol: return "col";
    case Op::kAt: return "at";
    case Op::kConv1d: return "conv1d";
    case Op::kMaxPool1d: return "maxpool1d";
    case Op::kBatchNorm: return "batchnorm1d";
    case Op::kPairSqDist: return "pairwise_sqdist";
    case Op::kTimeEncode: return "time_encode";
  }
  return "?";
}

const Shape& Value::shape() const { return g_->node(id_).shape; }
const std::vector<double>& Value::data() const { return g_->node(id_).val; }

std::vector<double> Value::grad() const {
  const Node& n = g_->node(id_);
  if (n.grad.empty()) return std::vector<double>(n.val.size(), 0.0);
  return n.grad;
}

double Value::scalar() const {
  const Node& n = g_->node(id_);
  if (n.val.size() != 1)
    throw ShapeError(std::string("scalar() on tensor of shape ") + shape_str(n.shape));
  return n.val[0];
}

int Graph::push(std::unique_ptr<Node> n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Graph::make(Op op, Shape shape, std::vector<int> parents) {
  auto n = std::make_unique<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->val.resize(shape_size(n->shape));
  n->parents = std::move(parents);
  for (int p : n->parents) n->needs = n->needs || nodes_[p]->needs;
  return Value(this, push(std::move(n)));
}

void Graph::check_same_shape(const char* op, const Value& a, const Value& b) const {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

Value Graph::constant(Shape s, std::vector<double> v) {
  if (static_cast<int>(v.size()) != shape_size(s))
    throw ShapeError("constant: data length does not match shape " + shape_str(s));
  auto n = std::make_unique<Node>();
  n->shape = std::move(s);
  n->val = std::move(v);
  return Value(this, push(std::move(n)));
}

Value Graph::scalar_const(double v) { return constant({1}, {v}); }

Value Graph::input(const Shape& s, const double* data) {
  auto n = std::make_unique<Node>();
  n->shape = s;
  n->val.assign(data, data + shape_size(s));
  return Value(this, push(std::move(n)));
}

Value Graph::param(Param& p) {
  auto n = std::make_unique<Node>();
  n->shape = p.shape;
  n->val = p.value;
  n->needs = true;
  n->param = &p;
  return Value(this, push(std::move(n)));
}

// ---------------------------------------------------------------------------
// Elementwise

Value Graph::add(Value a, Value b) {
  if (is_scalar(b.shape()) && !is_scalar(a.shape())) {
    Value out = make(Op::kAdd, a.shape(), {a.id(), b.id()});
    Node& n = mut(out.id());
    const double s = b.data()[0];
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = a.data()[i] + s;
    return out;
  }
  if (is_scalar(a.shape()) && !is_scalar(b.shape())) return add(b, a);
  check_same_shape("add", a, b);
  Value out = make(Op::kAdd, a.shape(), {a.id(), b.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = a.data()[i] + b.data()[i];
  return out;
}

Value Graph::sub(Value a, Value b) {
  if (!(a.shape() == b.shape() ||
        (is_scalar(a.shape()) || is_scalar(b.shape()))))
    check_same_shape("sub", a, b);
  const bool sa = is_scalar(a.shape()), sb = is_scalar(b.shape());
  Shape shape = sa && !sb ? b.shape() : a.shape();
  Value out = make(Op::kSub, shape, {a.id(), b.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) {
    double av = sa ? a.data()[0] : a.data()[i];
    double bv = sb ? b.data()[0] : b.data()[i];
    n.val[i] = av - bv;
  }
  return out;
}

Value Graph::mul(Value a, Value b) {
  if (is_scalar(b.shape()) && !is_scalar(a.shape())) {
    Value out = make(Op::kMul, a.shape(), {a.id(), b.id()});
    Node& n = mut(out.id());
    const double s = b.data()[0];
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = a.data()[i] * s;
    return out;
  }
  if (is_scalar(a.shape()) && !is_scalar(b.shape())) return mul(b, a);
  check_same_shape("mul", a, b);
  Value out = make(Op::kMul, a.shape(), {a.id(), b.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = a.data()[i] * b.data()[i];
  return out;
}

Value Graph::affine(Value x, double a, double b) {
  Value out = make(Op::kAffine, x.shape(), {x.id()});
  Node& n = mut(out.id());
  n.attr_a = a;
  n.attr_b = b;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = a * x.data()[i] + b;
  return out;
}

Value Graph::square(Value x) {
  Value out = make(Op::kSquare, x.shape(), {x.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = x.data()[i] * x.data()[i];
  return out;
}

Value Graph::exp(Value x) {
  Value out = make(Op::kExp, x.shape(), {x.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::exp(x.data()[i]);
  return out;
}

Value Graph::log(Value x) {
  Value out = make(Op::kLog, x.shape(), {x.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::log(x.data()[i]);
  return out;
}

Value Graph::sigmoid(Value x) {
  Value out = make(Op::kSigmoid, x.shape(), {x.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) {
    double v = x.data()[i];
    n.val[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  return out;
}

Value Graph::tanh(Value x) {
  Value out = make(Op::kTanh, x.shape(), {x.id()});
  Node& n = mut(out.id());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::tanh(x.data()[i]);
  return out;
}

Value Graph::leaky_relu(Value x, double slope) {
  Value out = make(Op::kLeakyRelu, x.shape(), {x.id()});
  Node& n = mut(out.id());
  n.attr_a = slope;
  for (std::size_t i = 0; i < n.val.size(); ++i) {
    double v = x.data()[i];
    n.val[i] = v > 0 ? v : slope * v;
  }
  return out;
}

Value Graph::clamp(Value x, double lo, double hi) {
  Value out = make(Op::kClamp, x.shape(), {x.id()});
  Node& n = mut(out.id());
  n.attr_a = lo;
  n.attr_b = hi;
  for (std::size_t i = 0; i < n.val.size(); ++i)
    n.val[i] = std::min(hi, std::max(lo, x.data()[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

Value Graph::sum(Value x) {
  Value out = make(Op::kSum, {1}, {x.id()});
  Node& n = mut(out.id());
  double s = 0;
  for (double v : x.data()) s += v;
  n.val[0] = s;
  return out;
}

namespace {

// Shared forward for max/min over an axis. Ties go to the lowest index.
void reduce_axis(const Node& x, Node& out, int axis, bool is_max) {
  const Shape& s = x.shape;
  if (s.size() == 1) {
    int best = 0;
    for (int i = 1; i < s[0]; ++i) {
      bool better = is_max ? x.val[i] > x.val[best] : x.val[i] < x.val[best];
      if (better) best = i;
    }
    out.val[0] = x.val[best];
    out.iaux = {best};
    return;
  }
  const int rows = s[0], cols = s[1];
  out.iaux.resize(out.val.size());
  if (axis == 1) {
    for (int r = 0; r < rows; ++r) {
      int best = 0;
      for (int c = 1; c < cols; ++c) {
        double v = x.val[r * cols + c], bv = x.val[r * cols + best];
        if (is_max ? v > bv : v < bv) best = c;
      }
      out.val[r] = x.val[r * cols + best];
      out.iaux[r] = best;
    }
  } else {
    for (int c = 0; c < cols; ++c) {
      int best = 0;
      for (int r = 1; r < rows; ++r) {
        double v = x.val[r * cols + c], bv = x.val[best * cols + c];
        if (is_max ? v > bv : v < bv) best = r;
      }
      out.val[c] = x.val[best * cols + c];
      out.iaux[c] = best;
    }
  }
}

}  // namespace

Value Graph::max_over_axis(Value x, int axis) {
  const Shape& s = x.shape();
  Shape out_shape;
  if (s.size() == 1) {
    if (s[0] == 0) throw ShapeError("max_over_axis: empty input");
    out_shape = {1};
  } else if (s.size() == 2) {
    if (axis != 0 && axis != 1) throw ShapeError("max_over_axis: bad axis");
    out_shape = {axis == 1 ? s[0] : s[1]};
  } else {
    throw ShapeError("max_over_axis: rank must be 1 or 2, got " + shape_str(s));
  }
  Value out = make(Op::kMaxAxis, out_shape, {x.id()});
  Node& n = mut(out.id());
  n.attr_i0 = axis;
  reduce_axis(node(x.id()), n, axis, /*is_max=*/true);
  return out;
}

Value Graph::min_over_axis(Value x, int axis) {
  const Shape& s = x.shape();
  Shape out_shape;
  if (s.size() == 1) {
    if (s[0] == 0) throw ShapeError("min_over_axis: empty input");
    out_shape = {1};
  } else if (s.size() == 2) {
    if (axis != 0 && axis != 1) throw ShapeError("min_over_axis: bad axis");
    out_shape = {axis == 1 ? s[0] : s[1]};
  } else {
    throw ShapeError("min_over_axis: rank must be 1 or 2, got " + shape_str(s));
  }
  Value out = make(Op::kMinAxis, out_shape, {x.id()});
  Node& n = mut(out.id());
  n.attr_i0 = axis;
  reduce_axis(node(x.id()), n, axis, /*is_max=*/false);
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

Value Graph::matmul(Value a, Value b) {
  const Shape &sa = a.shape(), &sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError(std::string("matmul: shape mismatch ") + shape_str(sa) +
                     " vs " + shape_str(sb));
  Value out = make(Op::kMatmul, {sa[0], sb[1]}, {a.id(), b.id()});
  Node& n = mut(out.id());
  MapMat(n.val.data(), sa[0], sb[1]).noalias() =
      MapConstMat(a.data().data(), sa[0], sa[1]) *
      MapConstMat(b.data().data(), sb[0], sb[1]);
  return out;
}

Value Graph::matvec(Value a, Value x) {
  const Shape &sa = a.shape(), &sx = x.shape();
  if (sa.size() != 2 || sx.size() != 1 || sa[1] != sx[0])
    throw ShapeError(std::string("matvec: shape mismatch ") + shape_str(sa) +
                     " vs " + shape_str(sx));
  Value out = make(Op::kMatvec, {sa[0]}, {a.id(), x.id()});
  Node& n = mut(out.id());
  // serial loops: reduction order must not depend on buffer alignment
  const double* ad = a.data().data();
  const double* xd = x.data().data();
  for (int r = 0; r < sa[0]; ++r) {
    double s = 0;
    for (int c = 0; c < sa[1]; ++c) s += ad[r * sa[1] + c] * xd[c];
    n.val[r] = s;
  }
  return out;
}

Value Graph::dot(Value a, Value b) {
  check_same_shape("dot", a, b);
  if (a.shape().size() != 1) throw ShapeError("dot: rank-1 inputs required");
  Value out = make(Op::kDot, {1}, {a.id(), b.id()});
  Node& n = mut(out.id());
  double s = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  n.val[0] = s;
  return out;
}

// ---------------------------------------------------------------------------
// Structure

Value Graph::concat(const std::vector<Value>& xs) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  int total = 0;
  std::vector<int> parents;
  for (const Value& v : xs) {
    if (v.shape().size() != 1) throw ShapeError("concat: rank-1 inputs required");
    total += v.shape()[0];
    parents.push_back(v.id());
  }
  Value out = make(Op::kConcat, {total}, std::move(parents));
  Node& n = mut(out.id());
  int off = 0;
  for (const Value& v : xs) {
    std::copy(v.data().begin(), v.data().end(), n.val.begin() + off);
    off += v.shape()[0];
  }
  return out;
}

Value Graph::hconcat(const std::vector<Value>& xs) {
  if (xs.empty()) throw ShapeError("hconcat: no inputs");
  const int rows = xs[0].shape().size() == 2 ? xs[0].shape()[0] : -1;
  if (rows < 0) throw ShapeError("hconcat: rank-2 inputs required");
  int total_cols = 0;
  std::vector<int> parents;
  for (const Value& v : xs) {
    if (v.shape().size() != 2 || v.shape()[0] != rows)
      throw ShapeError("hconcat: row mismatch " + shape_str(xs[0].shape()) +
                       " vs " + shape_str(v.shape()));
    total_cols += v.shape()[1];
    parents.push_back(v.id());
  }
  Value out = make(Op::kHConcat, {rows, total_cols}, std::move(parents));
  Node& n = mut(out.id());
  int off = 0;
  for (const Value& v : xs) {
    const int c = v.shape()[1];
    for (int r = 0; r < rows; ++r)
      std::copy(v.data().begin() + r * c, v.data().begin() + (r + 1) * c,
                n.val.begin() + r * total_cols + off);
    off += c;
  }
  return out;
}

Value Graph::col(Value x, int j) {
  const Shape& s = x.shape();
  if (s.size() != 2) throw ShapeError("col: rank-2 input required");
  if (j < 0 || j >= s[1]) throw ShapeError("col: index out of range");
  Value out = make(Op::kCol, {s[0]}, {x.id()});
  Node& n = mut(out.id());
  n.attr_i0 = j;
  for (int r = 0; r < s[0]; ++r) n.val[r] = x.data()[r * s[1] + j];
  return out;
}

Value Graph::at(Value x, int i) {
  const Shape& s = x.shape();
  if (s.size() != 1) throw ShapeError("at: rank-1 input required");
  if (i < 0 || i >= s[0]) throw ShapeError("at: index out of range");
  Value out = make(Op::kAt, {1}, {x.id()});
  Node& n = mut(out.id());
  n.attr_i0 = i;
  n.val[0] = x.data()[i];
  return out;
}

// ---------------------------------------------------------------------------
// Neural-net ops

Value Graph::conv1d(Value x, Value w, Value b, int kernel) {
  const Shape &sx = x.shape(), &sw = w.shape(), &sb = b.shape();
  if (sx.size() != 2)
    throw ShapeError("conv1d: input must be (channels, length), got " + shape_str(sx));
  const int cin = sx[0], len = sx[1];
  if (sw.size() != 3 || sw[1] != cin || sw[2] != kernel)
    throw ShapeError(std::string("conv1d: weight shape ") + shape_str(sw) +
                     " incompatible with input " + shape_str(sx));
  const int cout = sw[0];
  if (sb.size() != 1 || sb[0] != cout)
    throw ShapeError("conv1d: bias shape " + shape_str(sb) + " vs channels " +
                     std::to_string(cout));
  if (len < kernel)
    throw ShapeError("conv1d: input length " + std::to_string(len) +
                     " shorter than kernel " + std::to_string(kernel));
  const int lout = len - kernel + 1;
  Value out = make(Op::kConv1d, {cout, lout}, {x.id(), w.id(), b.id()});
  Node& n = mut(out.id());
  n.attr_i0 = kernel;

  // im2col: row (ci*kernel + k), column j holds x[ci, j+k].
  n.aux.resize(static_cast<std::size_t>(cin) * kernel * lout);
  const double* xd = x.data().data();
  for (int ci = 0; ci < cin; ++ci)
    for (int k = 0; k < kernel; ++k) {
      double* dst = n.aux.data() + (static_cast<std::size_t>(ci) * kernel + k) * lout;
      const double* src = xd + static_cast<std::size_t>(ci) * len + k;
      std::copy(src, src + lout, dst);
    }
  MapMat y(n.val.data(), cout, lout);
  y.noalias() = MapConstMat(w.data().data(), cout, cin * kernel) *
                MapConstMat(n.aux.data(), cin * kernel, lout);
  y.colwise() += MapConstVec(b.data().data(), cout);
  return out;
}

Value Graph::maxpool1d(Value x) {
  const Shape& sx = x.shape();
  if (sx.size() != 2) throw ShapeError("maxpool1d: input must be rank 2");
  const int c = sx[0], len = sx[1], lout = len / 2;
  if (lout == 0) throw ShapeError("maxpool1d: input length < 2");
  Value out = make(Op::kMaxPool1d, {c, lout}, {x.id()});
  Node& n = mut(out.id());
  n.iaux.resize(static_cast<std::size_t>(c) * lout);
  for (int ch = 0; ch < c; ++ch) {
    const double* row = x.data().data() + static_cast<std::size_t>(ch) * len;
    for (int j = 0; j < lout; ++j) {
      // ties kept at the lower index
      int pick = row[2 * j + 1] > row[2 * j] ? 1 : 0;
      n.val[ch * lout + j] = row[2 * j + pick];
      n.iaux[ch * lout + j] = pick;
    }
  }
  return out;
}

Value Graph::batchnorm1d(Value x, Value gamma, Value beta, int layer_id,
                         const BatchNormStats* frozen) {
  const Shape& sx = x.shape();
  if (sx.size() != 2) throw ShapeError("batchnorm1d: input must be (channels, length)");
  const int c = sx[0], len = sx[1];
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
    throw ShapeError("batchnorm1d: gamma/beta shape mismatch with " + shape_str(sx));
  Value out = make(Op::kBatchNorm, sx, {x.id(), gamma.id(), beta.id()});
  Node& n = mut(out.id());
  n.attr_i0 = layer_id;
  n.attr_i1 = frozen == nullptr ? 1 : 0;
  // aux layout: [mean(c), inv_std(c), clamped(c), xhat(c*len)]
  n.aux.resize(3 * static_cast<std::size_t>(c) + static_cast<std::size_t>(c) * len);
  double* mean = n.aux.data();
  double* inv_std = mean + c;
  double* clamped = inv_std + c;
  double* xhat = clamped + c;

  BatchNormObservation obs;
  if (frozen == nullptr) {
    obs.layer_id = layer_id;
    obs.mean.resize(c);
    obs.var_unbiased.resize(c);
  }
  for (int ch = 0; ch < c; ++ch) {
    const double* row = x.data().data() + static_cast<std::size_t>(ch) * len;
    double m, v;
    if (frozen) {
      m = frozen->mean[ch];
      v = frozen->var[ch];
    } else {
      m = 0;
      for (int j = 0; j < len; ++j) m += row[j];
      m /= len;
      v = 0;
      for (int j = 0; j < len; ++j) v += (row[j] - m) * (row[j] - m);
      v /= len;
      obs.mean[ch] = m;
      obs.var_unbiased[ch] = len > 1 ? v * len / (len - 1) : v;
    }
    const bool clip = v < kVarianceFloor;
    const double inv = 1.0 / std::sqrt(clip ? kVarianceFloor : v);
    mean[ch] = m;
    inv_std[ch] = inv;
    clamped[ch] = clip ? 1.0 : 0.0;
    const double g = gamma.data()[ch], bt = beta.data()[ch];
    for (int j = 0; j < len; ++j) {
      const double xh = (row[j] - m) * inv;
      xhat[ch * len + j] = xh;
      n.val[ch * len + j] = g * xh + bt;
    }
  }
  if (frozen == nullptr) bn_obs_.push_back(std::move(obs));
  return out;
}

Value Graph::pairwise_sqdist(Value p, Value h) {
  const Shape &sp = p.shape(), &sh = h.shape();
  if (sp.size() != 2 || sh.size() != 2 || sp[1] != sh[0])
    throw ShapeError(std::string("pairwise_sqdist: shape mismatch ") + shape_str(sp) +
                     " vs " + shape_str(sh));
  const int m = sp[0], ne = sp[1], no = sh[1];
  Value out = make(Op::kPairSqDist, {m, no}, {p.id(), h.id()});
  Node& n = mut(out.id());
  // serial loops for alignment-independent rounding
  const double* pd = p.data().data();
  const double* hd = h.data().data();
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < no; ++c) {
      double acc = 0;
      for (int e = 0; e < ne; ++e) {
        const double d = pd[r * ne + e] - hd[e * no + c];
        acc += d * d;
      }
      n.val[r * no + c] = acc;
    }
  return out;
}

Value Graph::time_encode(Value omega, Value theta, Value t) {
  const Shape &so = omega.shape(), &st = theta.shape();
  if (so.size() != 1 || st != so)
    throw ShapeError(std::string("time_encode: omega/theta mismatch ") + shape_str(so) +
                     " vs " + shape_str(st));
  if (shape_size(t.shape()) != 1) throw ShapeError("time_encode: t must be scalar");
  const int nd = so[0];
  Value out = make(Op::kTimeEncode, {2 * nd}, {omega.id(), theta.id(), t.id()});
  Node& n = mut(out.id());
  const double tv = t.data()[0];
  const double scale = std::sqrt(1.0 / nd);
  for (int j = 0; j < nd; ++j) {
    const double a = omega.data()[j] * tv + theta.data()[j];
    n.val[j] = scale * std::cos(a);
    n.val[nd + j] = scale * std::sin(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

std::vector<double>& ensure_grad(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
  return n.grad;
}

}  // namespace

void Graph::backward(Value loss) {
  if (loss.graph() != this) throw ShapeError("backward: loss from another graph");
  if (backward_done_) throw ShapeError("backward: graph already back-propagated");
  Node& ln = mut(loss.id());
  if (ln.val.size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(ln.shape));
  backward_done_ = true;
  ensure_grad(ln)[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = mut(id);
    if (n.grad.empty() || !n.needs) continue;
    if (n.op == Op::kLeaf) {
      if (n.param) {
        if (defer_param_grads_) {
          deferred_.emplace_back(n.param, std::move(n.grad));
        } else {
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.param->grad[i] += n.grad[i];
        }
      }
      continue;
    }
    backward_node(id);
  }
}

void Graph::apply_deferred_grads(DeferredGrads& grads) {
  for (auto& [param, g] : grads)
    for (std::size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
  grads.clear();
}

void Graph::clear_grads() {
  for (auto& n : nodes_) n->grad.clear();
  backward_done_ = false;
}

void Graph::backward_node(int id) {
  Node& n = mut(id);
  const std::vector<double>& g = n.grad;
  auto parent = [&](int k) -> Node& { return mut(n.parents[k]); };
  auto pval = [&](int k) -> const std::vector<double>& { return parent(k).val; };
  auto pgrad = [&](int k) -> std::vector<double>& {
    Node& p = parent(k);
    return ensure_grad(p);
  };
  auto needs = [&](int k) { return parent(k).needs; };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd: {
      for (int k = 0; k < 2; ++k) {
        if (!needs(k)) continue;
        std::vector<double>& pg = pgrad(k);
        if (pg.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
        } else {  // scalar parent broadcast over tensor
          double s = 0;
          for (double v : g) s += v;
          pg[0] += s;
        }
      }
      break;
    }
    case Op::kSub: {
      if (needs(0)) {
        std::vector<double>& pg = pgrad(0);
        if (pg.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
        } else {
          double s = 0;
          for (double v : g) s += v;
          pg[0] += s;
        }
      }
      if (needs(1)) {
        std::vector<double>& pg = pgrad(1);
        if (pg.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] -= g[i];
        } else {
          double s = 0;
          for (double v : g) s += v;
          pg[0] -= s;
        }
      }
      break;
    }
    case Op::kMul: {
      const std::vector<double>& a = pval(0);
      const std::vector<double>& b = pval(1);
      const bool sb = b.size() == 1 && a.size() != 1;
      if (sb) {
        if (needs(0)) {
          std::vector<double>& pg = pgrad(0);
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * b[0];
        }
        if (needs(1)) {
          double s = 0;
          for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * a[i];
          pgrad(1)[0] += s;
        }
      } else {
        if (needs(0)) {
          std::vector<double>& pg = pgrad(0);
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * b[i];
        }
        if (needs(1)) {
          std::vector<double>& pg = pgrad(1);
          for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * a[i];
        }
      }
      break;
    }
    case Op::kAffine: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += n.attr_a * g[i];
      break;
    }
    case Op::kSquare: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      const std::vector<double>& x = pval(0);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += 2.0 * x[i] * g[i];
      break;
    }
    case Op::kExp: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += n.val[i] * g[i];
      break;
    }
    case Op::kLog: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      const std::vector<double>& x = pval(0);
      for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i] / x[i];
      break;
    }
    case Op::kSigmoid: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        pg[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
      break;
    }
    case Op::kTanh: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        pg[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
      break;
    }
    case Op::kLeakyRelu: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      const std::vector<double>& x = pval(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        pg[i] += g[i] * (x[i] > 0 ? 1.0 : n.attr_a);
      break;
    }
    case Op::kClamp: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      const std::vector<double>& x = pval(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > n.attr_a && x[i] < n.attr_b) pg[i] += g[i];
      break;
    }
    case Op::kSum: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[0];
      break;
    }
    case Op::kMaxAxis:
    case Op::kMinAxis: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      const Shape& s = parent(0).shape;
      if (s.size() == 1) {
        pg[n.iaux[0]] += g[0];
      } else if (n.attr_i0 == 1) {
        const int cols = s[1];
        for (std::size_t r = 0; r < g.size(); ++r) pg[r * cols + n.iaux[r]] += g[r];
      } else {
        const int cols = s[1];
        for (std::size_t c = 0; c < g.size(); ++c)
          pg[static_cast<std::size_t>(n.iaux[c]) * cols + c] += g[c];
      }
      break;
    }
    case Op::kMatmul: {
      const Shape &sa = parent(0).shape, &sb = parent(1).shape;
      MapConstMat G(g.data(), sa[0], sb[1]);
      if (needs(0)) {
        MapMat dA(pgrad(0).data(), sa[0], sa[1]);
        dA.noalias() += G * MapConstMat(pval(1).data(), sb[0], sb[1]).transpose();
      }
      if (needs(1)) {
        MapMat dB(pgrad(1).data(), sb[0], sb[1]);
        dB.noalias() += MapConstMat(pval(0).data(), sa[0], sa[1]).transpose() * G;
      }
      break;
    }
    case Op::kMatvec: {
      const Shape& sa = parent(0).shape;
      const double* A = pval(0).data();
      const double* x = pval(1).data();
      if (needs(0)) {
        double* dA = pgrad(0).data();
        for (int r = 0; r < sa[0]; ++r)
          for (int c = 0; c < sa[1]; ++c) dA[r * sa[1] + c] += g[r] * x[c];
      }
      if (needs(1)) {
        double* dx = pgrad(1).data();
        for (int r = 0; r < sa[0]; ++r)
          for (int c = 0; c < sa[1]; ++c) dx[c] += A[r * sa[1] + c] * g[r];
      }
      break;
    }
    case Op::kDot: {
      const std::vector<double>& a = pval(0);
      const std::vector<double>& b = pval(1);
      if (needs(0)) {
        std::vector<double>& pg = pgrad(0);
        for (std::size_t i = 0; i < a.size(); ++i) pg[i] += g[0] * b[i];
      }
      if (needs(1)) {
        std::vector<double>& pg = pgrad(1);
        for (std::size_t i = 0; i < a.size(); ++i) pg[i] += g[0] * a[i];
      }
      break;
    }
    case Op::kConcat: {
      int off = 0;
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        const int len = parent(static_cast<int>(k)).shape[0];
        if (needs(static_cast<int>(k))) {
          std::vector<double>& pg = pgrad(static_cast<int>(k));
          for (int i = 0; i < len; ++i) pg[i] += g[off + i];
        }
        off += len;
      }
      break;
    }
    case Op::kHConcat: {
      const int rows = n.shape[0], total = n.shape[1];
      int off = 0;
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        const int c = parent(static_cast<int>(k)).shape[1];
        if (needs(static_cast<int>(k))) {
          std::vector<double>& pg = pgrad(static_cast<int>(k));
          for (int r = 0; r < rows; ++r)
            for (int j = 0; j < c; ++j) pg[r * c + j] += g[r * total + off + j];
        }
        off += c;
      }
      break;
    }
    case Op::kCol: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      const int cols = parent(0).shape[1];
      for (std::size_t r = 0; r < g.size(); ++r) pg[r * cols + n.attr_i0] += g[r];
      break;
    }
    case Op::kAt: {
      if (!needs(0)) break;
      pgrad(0)[n.attr_i0] += g[0];
      break;
    }
    case Op::kConv1d: {
      const int kernel = n.attr_i0;
      const Shape& sx = parent(0).shape;
      const int cin = sx[0], len = sx[1];
      const int cout = n.shape[0], lout = n.shape[1];
      MapConstMat G(g.data(), cout, lout);
      if (needs(1)) {
        MapMat dW(pgrad(1).data(), cout, cin * kernel);
        dW.noalias() += G * MapConstMat(n.aux.data(), cin * kernel, lout).transpose();
      }
      if (needs(2)) {
        double* db = pgrad(2).data();
        for (int co = 0; co < cout; ++co) {
          double s = 0;
          for (int j = 0; j < lout; ++j) s += g[static_cast<std::size_t>(co) * lout + j];
          db[co] += s;
        }
      }
      if (needs(0)) {
        RowMat dC = MapConstMat(pval(1).data(), cout, cin * kernel).transpose() * G;
        std::vector<double>& pg = pgrad(0);
        for (int ci = 0; ci < cin; ++ci)
          for (int k = 0; k < kernel; ++k) {
            const double* src = dC.data() + (static_cast<std::size_t>(ci) * kernel + k) * lout;
            double* dst = pg.data() + static_cast<std::size_t>(ci) * len + k;
            for (int j = 0; j < lout; ++j) dst[j] += src[j];
          }
      }
      break;
    }
    case Op::kMaxPool1d: {
      if (!needs(0)) break;
      std::vector<double>& pg = pgrad(0);
      const int len = parent(0).shape[1];
      const int c = n.shape[0], lout = n.shape[1];
      for (int ch = 0; ch < c; ++ch)
        for (int j = 0; j < lout; ++j)
          pg[static_cast<std::size_t>(ch) * len + 2 * j + n.iaux[ch * lout + j]] +=
              g[static_cast<std::size_t>(ch) * lout + j];
      break;
    }
    case Op::kBatchNorm: {
      const int c = n.shape[0], len = n.shape[1];
      const double* mean = n.aux.data();
      const double* inv_std = mean + c;
      const double* clamped = inv_std + c;
      const double* xhat = clamped + c;
      (void)mean;
      const std::vector<double>& gamma = pval(1);
      const bool training = n.attr_i1 == 1;
      for (int ch = 0; ch < c; ++ch) {
        const double* gy = g.data() + static_cast<std::size_t>(ch) * len;
        const double* xh = xhat + static_cast<std::size_t>(ch) * len;
        double sum_gy = 0, sum_gy_xh = 0;
        for (int j = 0; j < len; ++j) {
          sum_gy += gy[j];
          sum_gy_xh += gy[j] * xh[j];
        }
        if (needs(1)) pgrad(1)[ch] += sum_gy_xh;
        if (needs(2)) pgrad(2)[ch] += sum_gy;
        if (needs(0)) {
          double* dx = pgrad(0).data() + static_cast<std::size_t>(ch) * len;
          const double gi = gamma[ch] * inv_std[ch];
          if (!training) {
            // frozen statistics: plain affine map
            for (int j = 0; j < len; ++j) dx[j] += gi * gy[j];
          } else if (clamped[ch] > 0.5) {
            // variance clipped at the floor: only the mean depends on x
            const double mg = sum_gy / len;
            for (int j = 0; j < len; ++j) dx[j] += gi * (gy[j] - mg);
          } else {
            const double mg = sum_gy / len, mgx = sum_gy_xh / len;
            for (int j = 0; j < len; ++j) dx[j] += gi * (gy[j] - mg - xh[j] * mgx);
          }
        }
      }
      break;
    }
    case Op::kPairSqDist: {
      const Shape& sp = parent(0).shape;
      const int m = sp[0], ne = sp[1], no = parent(1).shape[1];
      const double* P = pval(0).data();
      const double* H = pval(1).data();
      const bool np = needs(0), nh = needs(1);
      double* dP = np ? pgrad(0).data() : nullptr;
      double* dH = nh ? pgrad(1).data() : nullptr;
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < no; ++c) {
          const double gv = 2.0 * g[r * no + c];
          if (gv == 0.0) continue;
          for (int e = 0; e < ne; ++e) {
            const double d = P[r * ne + e] - H[e * no + c];
            if (np) dP[r * ne + e] += gv * d;
            if (nh) dH[e * no + c] -= gv * d;
          }
        }
      break;
    }
    case Op::kTimeEncode: {
      const int nd = parent(0).shape[0];
      const double scale = std::sqrt(1.0 / nd);
      const std::vector<double>& omega = pval(0);
      const double tv = pval(2)[0];
      double dt = 0;
      for (int j = 0; j < nd; ++j) {
        // cos part is val[j]/scale, sin part val[nd+j]/scale
        const double cosv = n.val[j] / scale, sinv = n.val[nd + j] / scale;
        const double da = scale * (-g[j] * sinv + g[nd + j] * cosv);
        if (needs(0)) pgrad(0)[j] += da * tv;
        if (needs(1)) pgrad(1)[j] += da;
        dt += da * omega[j];
      }
      if (needs(2)) pgrad(2)[0] += dt;
      break;
    }
  }
}

// ---------------------------------------------------------------------------

Value gru_cell(Graph& g, Value h_prev, Value x, const GruWeights& w) {
  Value r = g.sigmoid(g.add(g.add(g.matvec(g.param(*w.w_reset), x),
                                  g.matvec(g.param(*w.u_reset), h_prev)),
                            g.param(*w.b_reset)));
  Value z = g.sigmoid(g.add(g.add(g.matvec(g.param(*w.w_update), x),
                                  g.matvec(g.param(*w.u_update), h_prev)),
                            g.param(*w.b_update)));
  Value cand_hid = g.add(g.matvec(g.param(*w.u_cand), h_prev), g.param(*w.b_cand_hid));
  Value cand = g.tanh(g.add(g.add(g.matvec(g.param(*w.w_cand), x), g.param(*w.b_cand_in)),
                            g.mul(r, cand_hid)));
  // h' = (1 - z) * cand + z * h_prev
  Value one_minus_z = g.affine(z, -1.0, 1.0);
  return g.add(g.mul(one_minus_z, cand), g.mul(z, h_prev));
}

}  // namespace temppnet::ad
