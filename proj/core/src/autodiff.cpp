#include "narrsum/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace narrsum::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

bool is_vector(Shape s) { return s.rows == 1 || s.cols == 1; }

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

}  // namespace

std::string Shape::str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Parameter::Parameter(std::string name, Shape shape)
    : name_(std::move(name)), shape_(shape), data_(shape.size(), 0.0) {}

std::span<double> Parameter::grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Parameter::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

Parameter& ParameterSet::add(std::string name, Shape shape) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  order_.push_back(std::make_unique<Parameter>(name, shape));
  by_name_[std::move(name)] = order_.back().get();
  return *order_.back();
}

Parameter& ParameterSet::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Parameter& ParameterSet::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

Parameter* ParameterSet::find(std::string_view name) {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : order_) n += p->shape().size();
  return n;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : order_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : order_) out.push_back(p.get());
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : order_) p->zero_grad();
}

void ParameterSet::init_uniform(std::mt19937_64& rng, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& p : order_) {
    for (double& v : p->data()) v = dist(rng);
  }
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  for (auto& p : order_) {
    const Parameter& src = other.at(p->name());
    if (!(src.shape() == p->shape())) {
      throw ShapeError("shape mismatch copying " + p->name());
    }
    std::copy(src.data().begin(), src.data().end(), p->data().begin());
  }
}

// ---------------------------------------------------------------------------
// Graph internals

Expr Graph::push(Shape shape, std::vector<double> value, Backward backward) {
  Node n;
  n.shape = shape;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Expr{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Graph::Node& Graph::node(Expr x) { return nodes_.at(x.id); }
const Graph::Node& Graph::node(Expr x) const { return nodes_.at(x.id); }

const double* Graph::vdata(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.source ? n.source->data().data() : n.value.data();
}

double* Graph::gdata(std::uint32_t id) { return nodes_[id].grad.data(); }

void Graph::check(Expr x, const char* op) const {
  if (!x.valid() || x.id >= nodes_.size()) {
    throw std::invalid_argument(std::string(op) + ": invalid expression handle");
  }
}

Shape Graph::shape(Expr x) const { return node(x).shape; }

std::span<const double> Graph::value(Expr x) const {
  check(x, "value");
  return {vdata(x.id), node(x).shape.size()};
}

double Graph::scalar_value(Expr x) const {
  require(shape(x).size() == 1, "scalar_value: expression is " + shape(x).str());
  return value(x)[0];
}

std::span<const double> Graph::grad(Expr x) const {
  check(x, "grad");
  const Node& n = node(x);
  if (n.trainable) return n.trainable->grad();
  return n.grad;
}

// ---------------------------------------------------------------------------
// Leaves

Expr Graph::constant(Shape shape, std::vector<double> values) {
  require(values.size() == shape.size(), "constant: value count does not match " + shape.str());
  return push(shape, std::move(values));
}

Expr Graph::zeros(Shape shape) { return push(shape, std::vector<double>(shape.size(), 0.0)); }

Expr Graph::scalar(double v) { return push({1, 1}, {v}); }

Expr Graph::column(std::span<const double> values) {
  return push({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

Expr Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end() && node(it->second).trainable) {
    return it->second;
  }
  Expr e = push(p.shape(), {});
  nodes_.back().source = &p;
  nodes_.back().trainable = &p;
  bound_[&p] = e;
  return e;
}

Expr Graph::param(const Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return it->second;
  Expr e = push(p.shape(), {});
  nodes_.back().source = &p;
  bound_[&p] = e;
  return e;
}

Expr Graph::lookup(Parameter& table, std::size_t row) {
  const Shape s = table.shape();
  require(row < s.rows, "lookup: row " + std::to_string(row) + " outside table " + s.str());
  const double* src = table.data().data() + row * s.cols;
  Parameter* target = &table;
  return push({s.cols, 1}, std::vector<double>(src, src + s.cols),
              [target, row](Graph& g, std::uint32_t self) {
                auto grad = target->grad();
                const double* gy = g.gdata(self);
                const std::size_t cols = target->shape().cols;
                for (std::size_t k = 0; k < cols; ++k) grad[row * cols + k] += gy[k];
              });
}

Expr Graph::lookup(const Parameter& table, std::size_t row) {
  const Shape s = table.shape();
  require(row < s.rows, "lookup: row " + std::to_string(row) + " outside table " + s.str());
  const double* src = table.data().data() + row * s.cols;
  return push({s.cols, 1}, std::vector<double>(src, src + s.cols));
}

std::vector<Expr> Graph::lookup_sequence(Parameter& table, std::span<const int> rows) {
  std::vector<Expr> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(lookup(table, static_cast<std::size_t>(r)));
  return out;
}

std::vector<Expr> Graph::lookup_sequence(const Parameter& table, std::span<const int> rows) {
  std::vector<Expr> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(lookup(table, static_cast<std::size_t>(r)));
  return out;
}

Expr Graph::detach(Expr x) {
  check(x, "detach");
  auto v = value(x);
  return push(shape(x), std::vector<double>(v.begin(), v.end()));
}

// ---------------------------------------------------------------------------
// Linear algebra

Expr Graph::matmul(Expr a, Expr b) {
  check(a, "matmul");
  check(b, "matmul");
  const Shape sa = shape(a), sb = shape(b);
  require(sa.cols == sb.rows, "matmul: " + sa.str() + " * " + sb.str());
  std::vector<double> out(sa.rows * sb.cols);
  MapMat(out.data(), sa.rows, sb.cols).noalias() =
      ConstMapMat(vdata(a.id), sa.rows, sa.cols) * ConstMapMat(vdata(b.id), sb.rows, sb.cols);
  return push({sa.rows, sb.cols}, std::move(out), [a, b, sa, sb](Graph& g, std::uint32_t self) {
    ConstMapMat gy(g.gdata(self), sa.rows, sb.cols);
    MapMat(g.gdata(a.id), sa.rows, sa.cols).noalias() +=
        gy * ConstMapMat(g.vdata(b.id), sb.rows, sb.cols).transpose();
    MapMat(g.gdata(b.id), sb.rows, sb.cols).noalias() +=
        ConstMapMat(g.vdata(a.id), sa.rows, sa.cols).transpose() * gy;
  });
}

Expr Graph::transpose(Expr x) {
  check(x, "transpose");
  const Shape s = shape(x);
  std::vector<double> out(s.size());
  MapMat(out.data(), s.cols, s.rows) = ConstMapMat(vdata(x.id), s.rows, s.cols).transpose();
  return push({s.cols, s.rows}, std::move(out), [x, s](Graph& g, std::uint32_t self) {
    MapMat(g.gdata(x.id), s.rows, s.cols) +=
        ConstMapMat(g.gdata(self), s.cols, s.rows).transpose();
  });
}

Expr Graph::add(Expr a, Expr b) {
  check(a, "add");
  check(b, "add");
  const Shape s = shape(a);
  require(s == shape(b), "add: " + s.str() + " + " + shape(b).str());
  std::vector<double> out(s.size());
  const double* va = vdata(a.id);
  const double* vb = vdata(b.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return push(s, std::move(out), [a, b, n = s.size()](Graph& g, std::uint32_t self) {
    const double* gy = g.gdata(self);
    double* ga = g.gdata(a.id);
    double* gb = g.gdata(b.id);
    for (std::size_t i = 0; i < n; ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  });
}

Expr Graph::sub(Expr a, Expr b) {
  check(a, "sub");
  check(b, "sub");
  const Shape s = shape(a);
  require(s == shape(b), "sub: " + s.str() + " - " + shape(b).str());
  std::vector<double> out(s.size());
  const double* va = vdata(a.id);
  const double* vb = vdata(b.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  return push(s, std::move(out), [a, b, n = s.size()](Graph& g, std::uint32_t self) {
    const double* gy = g.gdata(self);
    double* ga = g.gdata(a.id);
    double* gb = g.gdata(b.id);
    for (std::size_t i = 0; i < n; ++i) {
      ga[i] += gy[i];
      gb[i] -= gy[i];
    }
  });
}

Expr Graph::mul(Expr a, Expr b) {
  check(a, "mul");
  check(b, "mul");
  const Shape s = shape(a);
  require(s == shape(b), "mul: " + s.str() + " .* " + shape(b).str());
  std::vector<double> out(s.size());
  const double* va = vdata(a.id);
  const double* vb = vdata(b.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  return push(s, std::move(out), [a, b, n = s.size()](Graph& g, std::uint32_t self) {
    const double* gy = g.gdata(self);
    const double* va = g.vdata(a.id);
    const double* vb = g.vdata(b.id);
    double* ga = g.gdata(a.id);
    double* gb = g.gdata(b.id);
    for (std::size_t i = 0; i < n; ++i) {
      ga[i] += gy[i] * vb[i];
      gb[i] += gy[i] * va[i];
    }
  });
}

Expr Graph::scale(Expr x, double factor) {
  check(x, "scale");
  const Shape s = shape(x);
  std::vector<double> out(s.size());
  const double* v = vdata(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * factor;
  return push(s, std::move(out), [x, factor, n = s.size()](Graph& g, std::uint32_t self) {
    const double* gy = g.gdata(self);
    double* gx = g.gdata(x.id);
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * factor;
  });
}

Expr Graph::add_to_columns(Expr matrix, Expr col) {
  check(matrix, "add_to_columns");
  check(col, "add_to_columns");
  const Shape sm = shape(matrix), sc = shape(col);
  require(sc.cols == 1 && sc.rows == sm.rows,
          "add_to_columns: " + sm.str() + " with column " + sc.str());
  std::vector<double> out(sm.size());
  MapMat(out.data(), sm.rows, sm.cols) =
      ConstMapMat(vdata(matrix.id), sm.rows, sm.cols).colwise() +
      Eigen::Map<const Eigen::VectorXd>(vdata(col.id), sc.rows);
  return push(sm, std::move(out), [matrix, col, sm](Graph& g, std::uint32_t self) {
    ConstMapMat gy(g.gdata(self), sm.rows, sm.cols);
    MapMat(g.gdata(matrix.id), sm.rows, sm.cols) += gy;
    Eigen::Map<Eigen::VectorXd>(g.gdata(col.id), sm.rows) += gy.rowwise().sum();
  });
}

Expr Graph::concat(std::span<const Expr> parts) {
  require(!parts.empty(), "concat: no inputs");
  const std::size_t cols = shape(parts[0]).cols;
  std::size_t rows = 0;
  for (Expr p : parts) {
    check(p, "concat");
    require(shape(p).cols == cols, "concat: column mismatch " + shape(p).str());
    rows += shape(p).rows;
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (Expr p : parts) {
    const double* v = vdata(p.id);
    out.insert(out.end(), v, v + shape(p).size());
  }
  std::vector<Expr> inputs(parts.begin(), parts.end());
  return push({rows, cols}, std::move(out), [inputs](Graph& g, std::uint32_t self) {
    const double* gy = g.gdata(self);
    for (Expr p : inputs) {
      const std::size_t n = g.shape(p).size();
      double* gp = g.gdata(p.id);
      for (std::size_t i = 0; i < n; ++i) gp[i] += gy[i];
      gy += n;
    }
  });
}

Expr Graph::stack_columns(std::span<const Expr> columns) {
  require(!columns.empty(), "stack_columns: no inputs");
  const std::size_t rows = shape(columns[0]).rows;
  const std::size_t n = columns.size();
  for (Expr c : columns) {
    check(c, "stack_columns");
    require(shape(c).cols == 1 && shape(c).rows == rows,
            "stack_columns: expected (" + std::to_string(rows) + "x1), got " + shape(c).str());
  }
  std::vector<double> out(rows * n);
  for (std::size_t j = 0; j < n; ++j) {
    const double* v = vdata(columns[j].id);
    for (std::size_t i = 0; i < rows; ++i) out[i * n + j] = v[i];
  }
  std::vector<Expr> inputs(columns.begin(), columns.end());
  return push({rows, n}, std::move(out), [inputs, rows, n](Graph& g, std::uint32_t self) {
    const double* gy = g.gdata(self);
    for (std::size_t j = 0; j < n; ++j) {
      double* gc = g.gdata(inputs[j].id);
      for (std::size_t i = 0; i < rows; ++i) gc[i] += gy[i * n + j];
    }
  });
}

Expr Graph::slice_rows(Expr x, std::size_t start, std::size_t count) {
  check(x, "slice_rows");
  const Shape s = shape(x);
  require(start + count <= s.rows && count > 0,
          "slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
              ") outside " + s.str());
  const double* v = vdata(x.id) + start * s.cols;
  return push({count, s.cols}, std::vector<double>(v, v + count * s.cols),
              [x, offset = start * s.cols, n = count * s.cols](Graph& g, std::uint32_t self) {
                const double* gy = g.gdata(self);
                double* gx = g.gdata(x.id) + offset;
                for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i];
              });
}

Expr Graph::pick(Expr x, std::size_t index) {
  check(x, "pick");
  require(index < shape(x).size(), "pick: index outside " + shape(x).str());
  return push({1, 1}, {vdata(x.id)[index]}, [x, index](Graph& g, std::uint32_t self) {
    g.gdata(x.id)[index] += g.gdata(self)[0];
  });
}

Expr Graph::sum(Expr x) {
  check(x, "sum");
  const std::size_t n = shape(x).size();
  const double* v = vdata(x.id);
  const double total = std::accumulate(v, v + n, 0.0);
  return push({1, 1}, {total}, [x, n](Graph& g, std::uint32_t self) {
    const double gy = g.gdata(self)[0];
    double* gx = g.gdata(x.id);
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy;
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

Expr Graph::tanh(Expr x) {
  check(x, "tanh");
  const Shape s = shape(x);
  std::vector<double> out(s.size());
  const double* v = vdata(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v[i]);
  return push(s, std::move(out), [x, n = s.size()](Graph& g, std::uint32_t self) {
    const double* y = g.vdata(self);
    const double* gy = g.gdata(self);
    double* gx = g.gdata(x.id);
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * (1.0 - y[i] * y[i]);
  });
}

Expr Graph::sigmoid(Expr x) {
  check(x, "sigmoid");
  const Shape s = shape(x);
  std::vector<double> out(s.size());
  const double* v = vdata(x.id);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
  return push(s, std::move(out), [x, n = s.size()](Graph& g, std::uint32_t self) {
    const double* y = g.vdata(self);
    const double* gy = g.gdata(self);
    double* gx = g.gdata(x.id);
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (1.0 - y[i]);
  });
}

Expr Graph::softmax(Expr x) {
  check(x, "softmax");
  const Shape s = shape(x);
  require(is_vector(s) && s.size() > 0, "softmax: expected a vector, got " + s.str());
  const double* v = vdata(x.id);
  const double m = *std::max_element(v, v + s.size());
  std::vector<double> out(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) z += (out[i] = std::exp(v[i] - m));
  for (double& o : out) o /= z;
  return push(s, std::move(out), [x, n = s.size()](Graph& g, std::uint32_t self) {
    const double* y = g.vdata(self);
    const double* gy = g.gdata(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += gy[i] * y[i];
    double* gx = g.gdata(x.id);
    for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (gy[i] - dot);
  });
}

Expr Graph::log_softmax(Expr x, const Mask& mask) {
  check(x, "log_softmax");
  const Shape s = shape(x);
  require(is_vector(s) && s.size() > 0, "log_softmax: expected a vector, got " + s.str());
  require(mask.empty() || mask.size() == s.size(), "log_softmax: mask size mismatch");
  std::vector<bool> masked(s.size(), false);
  for (std::size_t i = 0; i < mask.size(); ++i) masked[i] = mask[i];
  const double* v = vdata(x.id);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!masked[i]) m = std::max(m, v[i]);
  }
  require(std::isfinite(m), "log_softmax: every entry is masked");
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!masked[i]) z += std::exp(v[i] - m);
  }
  const double log_z = m + std::log(z);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = masked[i] ? -std::numeric_limits<double>::infinity() : v[i] - log_z;
  }
  return push(s, std::move(out), [x, masked, n = s.size()](Graph& g, std::uint32_t self) {
    const double* y = g.vdata(self);
    const double* gy = g.gdata(self);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!masked[i]) total += gy[i];
    }
    double* gx = g.gdata(x.id);
    for (std::size_t i = 0; i < n; ++i) {
      if (!masked[i]) gx[i] += gy[i] - std::exp(y[i]) * total;
    }
  });
}

Expr Graph::cross_entropy(Expr logits, std::size_t target, const Mask& mask) {
  check(logits, "cross_entropy");
  const Shape s = shape(logits);
  require(target < s.size(), "cross_entropy: target outside " + s.str());
  require(mask.empty() || !mask[target], "cross_entropy: target is masked");
  Expr lsm = log_softmax(logits, mask);
  return scale(pick(lsm, target), -1.0);
}

// ---------------------------------------------------------------------------
// Backward

void Graph::backward(Expr loss) {
  check(loss, "backward");
  require(shape(loss).size() == 1, "backward: loss must be scalar, got " + shape(loss).str());
  for (std::uint32_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (n.trainable) {
      // Parameter views accumulate straight into the parameter's buffer.
      auto grad = n.trainable->grad();
      n.grad.assign(grad.size(), 0.0);
    } else {
      n.grad.assign(n.shape.size(), 0.0);
    }
  }
  nodes_[loss.id].grad[0] = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
  }
  for (std::uint32_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (!n.trainable) continue;
    auto grad = n.trainable->grad();
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += n.grad[k];
  }
}

// ---------------------------------------------------------------------------
// Recurrent and attention blocks

LstmWeights add_lstm(ParameterSet& params, const std::string& prefix, std::size_t input,
                     std::size_t hidden) {
  LstmWeights w;
  w.weight = &params.add(prefix + ".weight", {4 * hidden, input + hidden});
  w.bias = &params.add(prefix + ".bias", {4 * hidden, 1});
  w.input = input;
  w.hidden = hidden;
  return w;
}

void init_forget_bias(const LstmWeights& lstm, double value) {
  auto b = lstm.bias->data();
  for (std::size_t k = 0; k < lstm.hidden; ++k) b[lstm.hidden + k] = value;
}

LstmState lstm_zero_state(Graph& g, std::size_t hidden) {
  return {g.zeros({hidden, 1}), g.zeros({hidden, 1})};
}

LstmNodes bind(Graph& g, const LstmWeights& lstm, bool trainable) {
  if (trainable) return {g.param(*lstm.weight), g.param(*lstm.bias), lstm.hidden};
  return {g.param(std::as_const(*lstm.weight)), g.param(std::as_const(*lstm.bias)), lstm.hidden};
}

LstmState lstm_cell(Graph& g, Expr weight, Expr bias, Expr x, const LstmState& prev) {
  const std::size_t hidden = g.shape(prev.h).rows;
  require(g.shape(weight).rows == 4 * hidden,
          "lstm_cell: weight " + g.shape(weight).str() + " for hidden size " +
              std::to_string(hidden));
  require(g.shape(prev.c) == g.shape(prev.h), "lstm_cell: state shape mismatch");
  const Expr xh_parts[] = {x, prev.h};
  Expr xh = g.concat(xh_parts);
  Expr gates = g.add(g.matmul(weight, xh), bias);
  Expr in = g.sigmoid(g.slice_rows(gates, 0, hidden));
  Expr forget = g.sigmoid(g.slice_rows(gates, hidden, hidden));
  Expr out = g.sigmoid(g.slice_rows(gates, 2 * hidden, hidden));
  Expr cand = g.tanh(g.slice_rows(gates, 3 * hidden, hidden));
  Expr c = g.add(g.mul(forget, prev.c), g.mul(in, cand));
  Expr h = g.mul(out, g.tanh(c));
  return {h, c};
}

LstmState lstm_cell(Graph& g, const LstmNodes& lstm, Expr x, const LstmState& prev) {
  return lstm_cell(g, lstm.weight, lstm.bias, x, prev);
}

BiSequence bilstm_sequence(Graph& g, const LstmNodes& forward, const LstmNodes& backward,
                           std::span<const Expr> inputs) {
  BiSequence out;
  const std::size_t n = inputs.size();
  out.forward.resize(n);
  out.backward.resize(n);
  LstmState state = lstm_zero_state(g, forward.hidden);
  for (std::size_t i = 0; i < n; ++i) {
    state = lstm_cell(g, forward, inputs[i], state);
    out.forward[i] = state.h;
  }
  state = lstm_zero_state(g, backward.hidden);
  for (std::size_t i = n; i-- > 0;) {
    state = lstm_cell(g, backward, inputs[i], state);
    out.backward[i] = state.h;
  }
  return out;
}

AttentionWeights add_attention(ParameterSet& params, const std::string& prefix,
                               std::size_t key_dim, std::size_t query_dim,
                               std::size_t attention_dim) {
  AttentionWeights w;
  w.key_proj = &params.add(prefix + ".key_proj", {attention_dim, key_dim});
  w.query_proj = &params.add(prefix + ".query_proj", {attention_dim, query_dim});
  w.score = &params.add(prefix + ".score", {1, attention_dim});
  return w;
}

AttentionMemory prepare_attention(Graph& g, const AttentionWeights& weights,
                                  std::span<const Expr> keys, bool trainable) {
  AttentionMemory m;
  auto bind_param = [&](Parameter* p) {
    return trainable ? g.param(*p) : g.param(std::as_const(*p));
  };
  const Expr key_proj = bind_param(weights.key_proj);
  m.query_proj = bind_param(weights.query_proj);
  m.score = bind_param(weights.score);
  m.keys = g.stack_columns(keys);
  m.projected = g.matmul(key_proj, m.keys);
  m.count = keys.size();
  return m;
}

AttentionResult bahdanau_attention(Graph& g, const AttentionMemory& memory, Expr query,
                                   const Mask& mask) {
  AttentionResult r;
  Expr hidden = g.tanh(g.add_to_columns(memory.projected, g.matmul(memory.query_proj, query)));
  r.scores = g.matmul(memory.score, hidden);
  r.weights = mask.empty() ? g.softmax(r.scores) : g.softmax(g.add(r.scores, [&] {
    std::vector<double> penalty(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) penalty[i] = -1e30;
    }
    return g.constant({1, mask.size()}, std::move(penalty));
  }()));
  r.context = g.matmul(memory.keys, g.transpose(r.weights));
  return r;
}

// ---------------------------------------------------------------------------
// Gradient check

double grad_check(ParameterSet& params, const std::function<Expr(Graph&)>& build,
                  const GradCheckOptions& options) {
  params.zero_grad();
  {
    Graph g;
    Expr loss = build(g);
    g.backward(loss);
  }
  auto loss_at = [&]() {
    Graph g;
    return g.scalar_value(build(g));
  };

  std::mt19937_64 rng(options.seed);
  double worst = 0.0;
  for (Parameter* p : params.all()) {
    const std::size_t n = p->shape().size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > options.max_coordinates_per_parameter) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates_per_parameter);
    }
    const std::vector<double> analytic(p->grad().begin(), p->grad().end());
    for (std::size_t k : coords) {
      double& x = p->data()[k];
      const double saved = x;
      const double h = options.epsilon;
      auto at = [&](double offset) {
        x = saved + offset;
        return loss_at();
      };
      const double numeric =
          (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      x = saved;
      const double err = std::abs(analytic[k] - numeric) /
                         std::max(options.floor, std::abs(analytic[k]) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace narrsum::ad
