#include "sdt/numcore/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "sdt/errors.hpp"

namespace sdt {

namespace {

thread_local bool t_grad_enabled = true;

void require_finite(std::span<const double> values, const char* op, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericalError(std::string("non-finite ") + what + " in op '" + op + "'");
        }
    }
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = numel_of(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (numel_of(shape) != data.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

const Shape& Tensor::shape() const {
    if (!node_) throw UsageError("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw DimensionError("axis out of range for shape " + shape_str(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return numel_of(shape()); }

std::span<const double> Tensor::data() const {
    if (!node_) throw UsageError("use of undefined tensor");
    return node_->value;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw UsageError("use of undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    const auto& s = shape();
    if (s.size() != 2) throw DimensionError("at(i, j) needs a matrix");
    return node_->value[i * s[1] + j];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_) throw UsageError("use of undefined tensor");
    node_->grad.assign(node_->value.size(), 0.0);
}

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

Tensor Tensor::detach() const {
    auto node = std::make_shared<detail::Node>();
    node->shape = shape();
    node->value = node_->value;
    return Tensor(std::move(node));
}

Tensor Tensor::clone(bool requires_grad) const {
    Tensor t = detach();
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::record(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                      detail::BackwardFn backward, const char* op) {
    require_finite(value, op, "output");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    if (numel_of(node->shape) != node->value.size()) {
        throw DimensionError(std::string("op '") + op + "' produced inconsistent shape");
    }
    if (t_grad_enabled) {
        bool any = false;
        for (const auto& in : inputs) any = any || in.requires_grad();
        if (any) {
            node->requires_grad = true;
            node->inputs.reserve(inputs.size());
            for (auto& in : inputs) node->inputs.push_back(in.node_);
            node->backward = std::move(backward);
        }
    }
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    if (!node_) throw UsageError("backward on undefined tensor");
    if (node_->value.size() != 1) {
        throw UsageError("backward() requires a scalar loss, got shape " + shape_str(node_->shape));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            detail::Node* child = n->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    if (node_->grad.empty()) node_->grad.assign(1, 0.0);
    node_->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (!n->backward || n->grad.empty()) continue;
        detail::BackwardContext ctx{n->value, n->grad, {}};
        ctx.in_grads.reserve(n->inputs.size());
        for (auto& in : n->inputs) {
            if (in->requires_grad) {
                if (in->grad.empty()) in->grad.assign(in->value.size(), 0.0);
                ctx.in_grads.push_back(in->grad.data());
            } else {
                ctx.in_grads.push_back(nullptr);
            }
        }
        n->backward(ctx);
        for (auto& in : n->inputs) {
            if (in->requires_grad) require_finite(in->grad, n->op, "gradient");
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

}  // namespace sdt
