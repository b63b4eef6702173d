#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "genemut/tensor.hpp"

namespace genemut::ad {

struct Node {
    Tensor value;
    Tensor grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::function<void()> backprop;  // accumulates into parent grads
};

using Var = Node*;

// Records primitive ops in creation order (already topological). backward()
// replays the records once in reverse and then marks the tape consumed.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Generic extension point: value plus a closure that pushes adjoints to
    // the parents. requires_grad is inherited from the parents. Checks the
    // output for non-finite entries unless allow_nonfinite (the masking
    // sentinel -inf is legal only in explicitly constructed inputs).
    Var record(const char* op, Tensor value, const std::vector<Var>& parents,
               std::function<void()> backprop, bool allow_nonfinite = false);

    void backward(Var loss);

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t last_backward_visits() const { return backward_visits_; }

    // --- primitive ops -----------------------------------------------------
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double s);
    Var add_row_bias(Var m, Var bias);       // m[r x c] + bias[c] per row
    Var mul_row_broadcast(Var m, Var v);     // m[r x c] * v[c] per row
    Var matmul(Var a, Var b);                // [m x k] * [k x n]
    Var matmul_nt(Var a, Var b);             // [m x k] * [n x k]^T -> [m x n]
    Var matvec(Var m, Var v);                // [r x c] * [c] -> [r]
    Var softmax_rows(Var m);
    Var layer_norm(Var x, Var gain, Var bias, double eps);
    Var relu(Var x);
    Var sigmoid(Var x);
    Var rowwise_dot(Var a, Var b);           // y_i = <a_i, b_i> -> [r]
    Var mean_rows(Var m);                    // [r x c] -> [c]
    Var sum(Var x);                          // -> scalar

private:
    std::vector<std::unique_ptr<Node>> nodes_;
    bool consumed_ = false;
    std::size_t backward_visits_ = 0;
};

// Eager (tape-free) helpers shared with the rest of the code base.
Tensor matmul_value(const Tensor& a, const Tensor& b);
Tensor softmax_rows_value(const Tensor& m);
double sigmoid_value(double x);

}  // namespace genemut::ad
