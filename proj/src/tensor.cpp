#include "dcg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dcg {

namespace {

thread_local bool g_recording = true;

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw DimensionError("non-positive extent in shape");
        n *= d;
    }
    return n;
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
    }
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

NodePtr make_node(Op op, Shape shape, std::vector<double> value,
                  std::vector<NodePtr> inputs) {
    check_finite(value, "op output");
    auto n = std::make_shared<Node>();
    n->op = op;
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool rg = false;
    if (g_recording) {
        for (const auto& in : inputs) rg = rg || in->requires_grad;
    }
    if (rg) {
        n->inputs = std::move(inputs);
        n->requires_grad = true;
    } else {
        n->op = Op::Constant;
    }
    return n;
}

int rows_of(const Tensor& t) {
    const auto& s = t.shape();
    if (s.size() == 2) return s[0];
    if (s.size() == 1) return 1;
    throw DimensionError("expected 1-D or 2-D tensor");
}

int cols_of(const Tensor& t) {
    const auto& s = t.shape();
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    throw DimensionError("expected 1-D or 2-D tensor");
}

}  // namespace

bool grad_recording_enabled() { return g_recording; }

NoGradGuard::NoGradGuard() : prev_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = prev_; }

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw DimensionError("shape/data length mismatch");
    check_finite(data, "constant");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(n);
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

Tensor Tensor::zeros(Shape shape) {
    auto n = shape_numel(shape);
    return constant(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
    auto n = shape_numel(shape);
    return constant(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t = constant(std::move(shape), std::move(data));
    t.node()->requires_grad = true;
    return t;
}

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on non-scalar tensor");
    return node_->value[0];
}

Tensor Tensor::detach() const {
    return Tensor::constant(node_->shape, node_->value);
}

int Tensor::rows() const { return rows_of(*this); }
int Tensor::cols() const { return cols_of(*this); }

Tensor add(const Tensor& a, const Tensor& b) {
    if (!same_shape(a.shape(), b.shape())) throw DimensionError("add: shape mismatch");
    std::vector<double> out(a.data());
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return Tensor(make_node(Op::Add, a.shape(), std::move(out), {a.node(), b.node()}));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!same_shape(a.shape(), b.shape())) throw DimensionError("sub: shape mismatch");
    std::vector<double> out(a.data());
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return Tensor(make_node(Op::Sub, a.shape(), std::move(out), {a.node(), b.node()}));
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (double& x : out) x *= c;
    auto node = make_node(Op::Scale, a.shape(), std::move(out), {a.node()});
    node->scalar = c;
    return Tensor(node);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2)
        throw DimensionError("matmul: operands must be 2-D");
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) throw DimensionError("matmul: inner dimension mismatch");
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = pa[static_cast<size_t>(i) * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<size_t>(p) * n;
            double* orow = po + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return Tensor(make_node(Op::MatMul, {m, n}, std::move(out), {a.node(), b.node()}));
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) throw DimensionError("transpose: operand must be 2-D");
    const int r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(a.data().size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<size_t>(j) * r + i] = a.data()[static_cast<size_t>(i) * c + j];
    return Tensor(make_node(Op::Transpose, {c, r}, std::move(out), {a.node()}));
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.data());
    for (double& x : out) x = x > 0.0 ? x : 0.0;
    return Tensor(make_node(Op::Relu, a.shape(), std::move(out), {a.node()}));
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.data());
    for (double& x : out) x = std::exp(x);
    return Tensor(make_node(Op::Exp, a.shape(), std::move(out), {a.node()}));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!same_shape(a.shape(), b.shape())) throw DimensionError("mul: shape mismatch");
    std::vector<double> out(a.data());
    const auto& bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return Tensor(make_node(Op::Mul, a.shape(), std::move(out), {a.node(), b.node()}));
}

Tensor sum(const Tensor& a) {
    double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    return Tensor(make_node(Op::SumAll, {1}, {s}, {a.node()}));
}

Tensor sum_rows(const Tensor& a) {
    if (a.shape().size() != 2) throw DimensionError("sum_rows: operand must be 2-D");
    const int r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(static_cast<size_t>(c), 0.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[j] += a.data()[static_cast<size_t>(i) * c + j];
    return Tensor(make_node(Op::SumRows, {1, c}, std::move(out), {a.node()}));
}

Tensor sum_cols(const Tensor& a) {
    if (a.shape().size() != 2) throw DimensionError("sum_cols: operand must be 2-D");
    const int r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(static_cast<size_t>(r), 0.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[i] += a.data()[static_cast<size_t>(i) * c + j];
    return Tensor(make_node(Op::SumCols, {r, 1}, std::move(out), {a.node()}));
}

Tensor mean(const Tensor& a) {
    double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    auto node = make_node(Op::MeanAll, {1}, {s / static_cast<double>(a.numel())}, {a.node()});
    return Tensor(node);
}

Tensor broadcast_rows(const Tensor& a, int rows) {
    if (a.shape().size() != 2 || a.shape()[0] != 1)
        throw DimensionError("broadcast_rows: operand must be [1,C]");
    const int c = a.shape()[1];
    std::vector<double> out(static_cast<size_t>(rows) * c);
    for (int i = 0; i < rows; ++i)
        std::copy(a.data().begin(), a.data().end(), out.begin() + static_cast<size_t>(i) * c);
    return Tensor(make_node(Op::BroadcastRows, {rows, c}, std::move(out), {a.node()}));
}

Tensor broadcast_cols(const Tensor& a, int cols) {
    if (a.shape().size() != 2 || a.shape()[1] != 1)
        throw DimensionError("broadcast_cols: operand must be [R,1]");
    const int r = a.shape()[0];
    std::vector<double> out(static_cast<size_t>(r) * cols);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < cols; ++j) out[static_cast<size_t>(i) * cols + j] = a.data()[i];
    return Tensor(make_node(Op::BroadcastCols, {r, cols}, std::move(out), {a.node()}));
}

Tensor broadcast_scalar(const Tensor& a, Shape shape) {
    if (a.numel() != 1) throw DimensionError("broadcast_scalar: operand must be scalar");
    auto n = shape_numel(shape);
    std::vector<double> out(static_cast<size_t>(n), a.data()[0]);
    return Tensor(make_node(Op::BroadcastScalar, std::move(shape), std::move(out), {a.node()}));
}

Tensor gather(const Tensor& a, const std::vector<int>& labels) {
    if (a.shape().size() != 2) throw DimensionError("gather: operand must be 2-D");
    const int r = a.shape()[0], c = a.shape()[1];
    if (static_cast<int>(labels.size()) != r) throw ContractError("gather: one label per row");
    std::vector<double> out(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        if (labels[i] < 0 || labels[i] >= c) throw ContractError("gather: label out of range");
        out[i] = a.data()[static_cast<size_t>(i) * c + labels[i]];
    }
    auto node = make_node(Op::Gather, {r, 1}, std::move(out), {a.node()});
    node->indices = labels;
    return Tensor(node);
}

Tensor logsumexp(const Tensor& a) {
    if (a.shape().size() != 2) throw DimensionError("logsumexp: operand must be 2-D");
    const int r = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const double* row = a.data().data() + static_cast<size_t>(i) * c;
        double m = *std::max_element(row, row + c);
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += std::exp(row[j] - m);
        out[i] = m + std::log(s);
    }
    return Tensor(make_node(Op::LogSumExp, {r, 1}, std::move(out), {a.node()}));
}

namespace {

// VJP of one node expressed through graph ops, so second-order
// backward works without special cases.
void accumulate(std::unordered_map<Node*, Tensor>& grads, const NodePtr& target,
                const Tensor& g) {
    if (!target->requires_grad) return;
    auto it = grads.find(target.get());
    if (it == grads.end())
        grads.emplace(target.get(), g);
    else
        it->second = add(it->second, g);
}

void backprop_node(const NodePtr& n, const Tensor& g,
                   std::unordered_map<Node*, Tensor>& grads) {
    switch (n->op) {
        case Op::Constant:
            break;
        case Op::Add:
            accumulate(grads, n->inputs[0], g);
            accumulate(grads, n->inputs[1], g);
            break;
        case Op::Sub:
            accumulate(grads, n->inputs[0], g);
            accumulate(grads, n->inputs[1], scale(g, -1.0));
            break;
        case Op::Scale:
            accumulate(grads, n->inputs[0], scale(g, n->scalar));
            break;
        case Op::MatMul: {
            Tensor a(n->inputs[0]), b(n->inputs[1]);
            if (n->inputs[0]->requires_grad)
                accumulate(grads, n->inputs[0], matmul(g, transpose(b)));
            if (n->inputs[1]->requires_grad)
                accumulate(grads, n->inputs[1], matmul(transpose(a), g));
            break;
        }
        case Op::Transpose:
            accumulate(grads, n->inputs[0], transpose(g));
            break;
        case Op::Relu: {
            // Subgradient 0 at exactly 0; mask is constant w.r.t. the input.
            std::vector<double> mask(n->inputs[0]->value.size());
            for (size_t i = 0; i < mask.size(); ++i)
                mask[i] = n->inputs[0]->value[i] > 0.0 ? 1.0 : 0.0;
            accumulate(grads, n->inputs[0],
                       mul(g, Tensor::constant(n->inputs[0]->shape, std::move(mask))));
            break;
        }
        case Op::Exp:
            accumulate(grads, n->inputs[0], mul(g, Tensor(n)));
            break;
        case Op::Gather: {
            const int r = n->inputs[0]->shape[0], c = n->inputs[0]->shape[1];
            std::vector<double> onehot(static_cast<size_t>(r) * c, 0.0);
            for (int i = 0; i < r; ++i)
                onehot[static_cast<size_t>(i) * c + n->indices[i]] = 1.0;
            accumulate(grads, n->inputs[0],
                       mul(broadcast_cols(g, c), Tensor::constant({r, c}, std::move(onehot))));
            break;
        }
        case Op::SumAll:
            accumulate(grads, n->inputs[0], broadcast_scalar(g, n->inputs[0]->shape));
            break;
        case Op::SumRows:
            accumulate(grads, n->inputs[0], broadcast_rows(g, n->inputs[0]->shape[0]));
            break;
        case Op::SumCols:
            accumulate(grads, n->inputs[0], broadcast_cols(g, n->inputs[0]->shape[1]));
            break;
        case Op::MeanAll: {
            auto numel = static_cast<double>(n->inputs[0]->value.size());
            accumulate(grads, n->inputs[0],
                       scale(broadcast_scalar(g, n->inputs[0]->shape), 1.0 / numel));
            break;
        }
        case Op::Mul: {
            Tensor a(n->inputs[0]), b(n->inputs[1]);
            if (n->inputs[0]->requires_grad) accumulate(grads, n->inputs[0], mul(g, b));
            if (n->inputs[1]->requires_grad) accumulate(grads, n->inputs[1], mul(g, a));
            break;
        }
        case Op::BroadcastRows:
            accumulate(grads, n->inputs[0], sum_rows(g));
            break;
        case Op::BroadcastCols:
            accumulate(grads, n->inputs[0], sum_cols(g));
            break;
        case Op::BroadcastScalar:
            accumulate(grads, n->inputs[0], sum(g));
            break;
        case Op::LogSumExp: {
            // d lse / dx = softmax(x), written via graph ops so it stays
            // differentiable: exp(x - lse(x)).
            Tensor x(n->inputs[0]);
            Tensor lse(n);
            Tensor softmax = exp(sub(x, broadcast_cols(lse, x.shape()[1])));
            accumulate(grads, n->inputs[0],
                       mul(broadcast_cols(g, x.shape()[1]), softmax));
            break;
        }
    }
}

}  // namespace

std::vector<Tensor> backward(const Tensor& scalar_out, std::span<const Tensor> wrt,
                             bool create_graph) {
    if (scalar_out.numel() != 1) throw ContractError("backward: output must be a scalar");
    for (const auto& p : wrt)
        if (!p.requires_grad()) throw ContractError("backward: wrt tensor is not grad-tracked");

    // Topological order over grad-tracked nodes reachable from the root.
    std::vector<NodePtr> order;
    std::unordered_map<Node*, int> state;  // 0 unseen, 1 on stack, 2 done
    std::vector<std::pair<NodePtr, size_t>> stack;
    if (scalar_out.node()->requires_grad) {
        stack.push_back({scalar_out.node(), 0});
        state[scalar_out.node().get()] = 1;
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->inputs.size()) {
                NodePtr child = node->inputs[idx++];
                if (child->requires_grad && state[child.get()] == 0) {
                    state[child.get()] = 1;
                    stack.push_back({child, 0});
                }
            } else {
                state[node.get()] = 2;
                order.push_back(node);
                stack.pop_back();
            }
        }
    }

    std::unordered_map<Node*, Tensor> grads;
    {
        std::unique_ptr<NoGradGuard> guard;
        if (!create_graph) guard = std::make_unique<NoGradGuard>();
        if (!order.empty()) {
            grads.emplace(scalar_out.node().get(),
                          Tensor::full(scalar_out.shape(), 1.0));
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                auto git = grads.find(it->get());
                if (git == grads.end()) continue;
                backprop_node(*it, git->second, grads);
            }
        }
    }

    std::vector<Tensor> result;
    result.reserve(wrt.size());
    for (const auto& p : wrt) {
        auto it = grads.find(p.node().get());
        if (it == grads.end())
            result.push_back(Tensor::zeros(p.shape()));
        else
            result.push_back(create_graph ? it->second : it->second.detach());
    }
    return result;
}

double finite_difference_check(
    const std::function<Tensor(std::span<const Tensor>)>& f,
    const std::vector<Tensor>& point, double step) {
    if (step <= 0.0) throw ContractError("finite_difference_check: step must be positive");

    Tensor out = f(point);
    if (out.numel() != 1) throw ContractError("finite_difference_check: f must be scalar");
    auto analytic = backward(out, point, /*create_graph=*/false);

    double worst = 0.0;
    for (size_t pi = 0; pi < point.size(); ++pi) {
        for (std::int64_t i = 0; i < point[pi].numel(); ++i) {
            auto eval_at = [&](double delta) {
                std::vector<Tensor> shifted;
                shifted.reserve(point.size());
                for (size_t qi = 0; qi < point.size(); ++qi) {
                    std::vector<double> d = point[qi].data();
                    if (qi == pi) d[static_cast<size_t>(i)] += delta;
                    shifted.push_back(Tensor::param(point[qi].shape(), std::move(d)));
                }
                NoGradGuard ng;
                double v = f(shifted).item();
                if (!std::isfinite(v)) throw NumericError("finite_difference_check: non-finite f");
                return v;
            };
            double numeric = (eval_at(step) - eval_at(-step)) / (2.0 * step);
            double a = analytic[pi].data()[static_cast<size_t>(i)];
            double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace dcg
