#pragma once

// Reverse-mode differentiation over dense row-major float64 matrices.
//
// A Graph records operations in creation order, which is a topological order,
// so backward() is a single reverse sweep. Parameters live outside any graph
// and accumulate gradients across graphs until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace narrsum::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Parameter {
 public:
  Parameter(std::string name, Shape shape);

  const std::string& name() const { return name_; }
  Shape shape() const { return shape_; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> grad();
  std::span<const double> grad() const { return grad_; }
  bool has_grad() const { return !grad_.empty(); }
  void zero_grad();

  /// Frozen parameters still receive gradients but optimizers skip them.
  bool frozen = false;

 private:
  std::string name_;
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

/// Insertion-ordered owner of named parameters. Addresses are stable.
class ParameterSet {
 public:
  Parameter& add(std::string name, Shape shape);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return order_.size(); }
  std::size_t scalar_count() const;
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();
  void init_uniform(std::mt19937_64& rng, double bound);
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> order_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

/// True entries are excluded from softmax-style ops.
using Mask = std::vector<bool>;

struct Expr {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaves.
  Expr constant(Shape shape, std::vector<double> values);
  Expr zeros(Shape shape);
  Expr scalar(double v);
  Expr column(std::span<const double> values);
  /// View of a parameter; gradients flow into it. Repeated calls return the
  /// same node.
  Expr param(Parameter& p);
  /// View of a parameter treated as a constant.
  Expr param(const Parameter& p);
  /// Row `row` of an embedding table as a column vector.
  Expr lookup(Parameter& table, std::size_t row);
  Expr lookup(const Parameter& table, std::size_t row);
  std::vector<Expr> lookup_sequence(Parameter& table, std::span<const int> rows);
  std::vector<Expr> lookup_sequence(const Parameter& table, std::span<const int> rows);
  /// Copy of `x` with no gradient path.
  Expr detach(Expr x);

  // Linear algebra.
  Expr matmul(Expr a, Expr b);
  Expr transpose(Expr x);
  Expr add(Expr a, Expr b);
  Expr sub(Expr a, Expr b);
  Expr mul(Expr a, Expr b);
  Expr scale(Expr x, double factor);
  /// Adds the column vector `col` to every column of `matrix`.
  Expr add_to_columns(Expr matrix, Expr col);
  Expr concat(std::span<const Expr> parts);
  Expr stack_columns(std::span<const Expr> columns);
  Expr slice_rows(Expr x, std::size_t start, std::size_t count);
  Expr pick(Expr x, std::size_t index);
  Expr sum(Expr x);

  // Nonlinearities over vectors (rows == 1 or cols == 1 for the softmaxes).
  Expr tanh(Expr x);
  Expr sigmoid(Expr x);
  Expr softmax(Expr x);
  /// Entries with mask[i] == true are excluded: value -inf, no gradient.
  Expr log_softmax(Expr x, const Mask& mask = {});
  /// -log softmax(logits)[target] over the unmasked entries.
  Expr cross_entropy(Expr logits, std::size_t target, const Mask& mask = {});

  Shape shape(Expr x) const;
  std::span<const double> value(Expr x) const;
  double scalar_value(Expr x) const;
  std::span<const double> grad(Expr x) const;
  std::size_t size() const { return nodes_.size(); }

  /// Propagates d(loss)/d(node) to every node and accumulates into the
  /// trainable parameters. `loss` must be 1x1.
  void backward(Expr loss);

 private:
  using Backward = std::function<void(Graph&, std::uint32_t)>;

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    const Parameter* source = nullptr;
    Parameter* trainable = nullptr;
    Backward backward;
  };

  Expr push(Shape shape, std::vector<double> value, Backward backward = {});
  Node& node(Expr x);
  const Node& node(Expr x) const;
  const double* vdata(std::uint32_t id) const;
  double* gdata(std::uint32_t id);
  void check(Expr x, const char* op) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, Expr> bound_;
};

// Recurrent and attention building blocks.

struct LstmWeights {
  Parameter* weight = nullptr;  // 4H x (I + H), gate order: input, forget, output, cell
  Parameter* bias = nullptr;    // 4H x 1
  std::size_t input = 0;
  std::size_t hidden = 0;
};

/// Registers LSTM weights under `prefix`. Call ParameterSet::init_uniform and
/// then init_forget_bias after all parameters are added.
LstmWeights add_lstm(ParameterSet& params, const std::string& prefix, std::size_t input,
                     std::size_t hidden);
void init_forget_bias(const LstmWeights& lstm, double value = 1.0);

struct LstmState {
  Expr h;
  Expr c;
};

LstmState lstm_zero_state(Graph& g, std::size_t hidden);

/// One LSTM step; `weight` and `bias` are graph nodes bound from LstmWeights.
LstmState lstm_cell(Graph& g, Expr weight, Expr bias, Expr x, const LstmState& prev);

struct BiSequence {
  std::vector<Expr> forward;   // forward[i]: state after reading inputs[0..i]
  std::vector<Expr> backward;  // backward[i]: state after reading inputs[i..n-1]
};

struct LstmNodes {
  Expr weight;
  Expr bias;
  std::size_t hidden = 0;
};

/// Binds LSTM weights into `g`; `trainable == false` binds them as constants.
LstmNodes bind(Graph& g, const LstmWeights& lstm, bool trainable = true);

LstmState lstm_cell(Graph& g, const LstmNodes& lstm, Expr x, const LstmState& prev);

/// Runs a forward and a backward LSTM over `inputs`.
BiSequence bilstm_sequence(Graph& g, const LstmNodes& forward, const LstmNodes& backward,
                           std::span<const Expr> inputs);

struct AttentionWeights {
  Parameter* key_proj = nullptr;    // A x K
  Parameter* query_proj = nullptr;  // A x Q
  Parameter* score = nullptr;       // 1 x A
};

AttentionWeights add_attention(ParameterSet& params, const std::string& prefix,
                               std::size_t key_dim, std::size_t query_dim,
                               std::size_t attention_dim);

/// Keys stacked as columns plus their projection; reusable across queries.
struct AttentionMemory {
  Expr keys;       // K x n
  Expr projected;  // A x n
  Expr query_proj;
  Expr score;
  std::size_t count = 0;
};

AttentionMemory prepare_attention(Graph& g, const AttentionWeights& weights,
                                  std::span<const Expr> keys, bool trainable = true);

struct AttentionResult {
  Expr scores;   // 1 x n, additive scores v^T tanh(Wk k_i + Wq q)
  Expr weights;  // 1 x n, softmax over unmasked scores
  Expr context;  // K x 1
};

AttentionResult bahdanau_attention(Graph& g, const AttentionMemory& memory, Expr query,
                                   const Mask& mask = {});

// Verification.

struct GradCheckOptions {
  double epsilon = 1e-4;  // five-point central difference step
  double floor = 1e-6;    // lower bound on the error denominator
  std::size_t max_coordinates_per_parameter = 24;
  std::uint64_t seed = 7;
};

/// Max over sampled coordinates of |analytic - numeric| /
/// max(floor, |analytic| + |numeric|). `build` must construct the scalar loss
/// deterministically from the current parameter values.
double grad_check(ParameterSet& params, const std::function<Expr(Graph&)>& build,
                  const GradCheckOptions& options = {});

}  // namespace narrsum::ad
