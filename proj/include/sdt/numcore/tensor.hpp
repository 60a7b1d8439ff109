#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sdt {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;

// Handed to an op's backward closure. in_grads[i] is null when input i does
// not take gradients; otherwise it is sized like that input and must be
// accumulated into, never overwritten.
struct BackwardContext {
    std::span<const double> out_value;
    std::span<const double> out_grad;
    std::vector<double*> in_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;
    const char* op = "leaf";
};

}  // namespace detail

/// Dense row-major tensor of doubles with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage. Values produced
/// by ops are never mutated; only leaves (parameters) are written, and only
/// by the optimizer or by explicit initialisation.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t i) const { return data()[i]; }
    double at(std::size_t i, std::size_t j) const;

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    /// Allocates (if needed) and zeroes the gradient buffer.
    void zero_grad();

    /// Reverse-mode sweep from this scalar. Gradients accumulate additively
    /// into every reachable tensor that requires them.
    void backward() const;

    /// Same values, cut from the graph.
    Tensor detach() const;
    /// Deep copy of the values into a fresh leaf.
    Tensor clone(bool requires_grad = false) const;

    const char* op_name() const;
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

    // Used by op implementations.
    static Tensor record(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                         detail::BackwardFn backward, const char* op);
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// A named trainable leaf.
struct Parameter {
    std::string name;
    Tensor tensor;
};

}  // namespace sdt
