// Reverse-mode autodiff over dense 64-bit tensors.
//
// Gradients are built out of the same graph ops, so backward() with
// create_graph=true yields grad tensors that can themselves be
// differentiated (reverse-over-reverse, Hessian-vector products).
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dcg {

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

enum class Op {
    Constant,
    Add,
    Sub,
    Scale,
    MatMul,
    Transpose,
    Relu,
    Exp,
    Gather,
    SumAll,
    SumRows,   // [R,C] -> [1,C]
    SumCols,   // [R,C] -> [R,1]
    MeanAll,
    Mul,       // elementwise
    BroadcastRows,   // [1,C] -> [R,C]
    BroadcastCols,   // [R,1] -> [R,C]
    BroadcastScalar, // [1]   -> shape
    LogSumExp,       // row-wise, [R,C] -> [R,1]
};

struct Node {
    Op op = Op::Constant;
    Shape shape;
    std::vector<double> value;
    std::vector<std::shared_ptr<Node>> inputs;
    bool requires_grad = false;
    double scalar = 0.0;          // Scale coefficient
    std::vector<int> indices;     // Gather labels
};

using NodePtr = std::shared_ptr<Node>;

// Thread-local switch: when recording is off, every new tensor is a
// detached constant regardless of its inputs.
bool grad_recording_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor constant(Shape shape, std::vector<double> data);
    static Tensor scalar(double v);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    // Grad-tracked leaf.
    static Tensor param(Shape shape, std::vector<double> data);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    const std::vector<double>& data() const { return node_->value; }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
    bool requires_grad() const { return node_->requires_grad; }
    const NodePtr& node() const { return node_; }

    // Value of a one-element tensor.
    double item() const;
    // Same values, detached from any graph.
    Tensor detach() const;

    int rows() const;
    int cols() const;

  private:
    NodePtr node_;
};

// Elementwise / structural ops. All validate shapes and reject
// non-finite outputs with NumericError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& a);
Tensor sum_rows(const Tensor& a);
Tensor sum_cols(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor broadcast_rows(const Tensor& a, int rows);
Tensor broadcast_cols(const Tensor& a, int cols);
Tensor broadcast_scalar(const Tensor& a, Shape shape);
// Picks value[i, labels[i]] per row -> [R,1].
Tensor gather(const Tensor& a, const std::vector<int>& labels);
// Row-wise logsumexp -> [R,1]; numerically shifted by the row max.
Tensor logsumexp(const Tensor& a);

// d(scalar)/d(wrt[i]) for each wrt tensor; zero tensor when a wrt
// parameter does not participate in the graph is a missing-node error.
// With create_graph=true the returned gradients are themselves
// grad-tracked expressions.
std::vector<Tensor> backward(const Tensor& scalar_out, std::span<const Tensor> wrt,
                             bool create_graph = false);

// Worst componentwise relative discrepancy between backward() and a
// central finite difference of f at `point`.
double finite_difference_check(
    const std::function<Tensor(std::span<const Tensor>)>& f,
    const std::vector<Tensor>& point, double step);

}  // namespace dcg
