#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ordlab/errors.hpp"

namespace ordlab {

// Dense row-major double tensor with an optional gradient buffer.
// Values are immutable once an op has produced the tensor; gradients are the
// only mutable state and are confined to the tape that recorded the op.
struct TensorData {
    std::vector<size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;

    size_t size() const { return values.size(); }
    size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? size() : shape[1]; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) grad.assign(grad.size(), 0.0);
    }

    double& at(size_t r, size_t c) { return values[r * cols() + c]; }
    double at(size_t r, size_t c) const { return values[r * cols() + c]; }
};

using Tensor = std::shared_ptr<TensorData>;

// Ordered log of recorded operations. Replaying the closures in reverse
// order visits every node exactly once and accumulates gradients additively.
// Each node remembers its output so a fresh backward pass can reset the
// intermediates' grads; leaves (tensors never produced on this tape) keep
// accumulating across passes.
class Tape {
public:
    void record(Tensor output, std::function<void()> backward_step) {
        nodes_.push_back({std::move(output), std::move(backward_step)});
    }
    size_t node_count() const { return nodes_.size(); }
    void clear() {
        nodes_.clear();
        nodes_.shrink_to_fit();
    }
    void zero_intermediate_grads() {
        for (auto& n : nodes_) n.output->zero_grad();
    }
    void replay_reverse() {
        for (size_t i = nodes_.size(); i > 0; --i) nodes_[i - 1].fn();
    }

private:
    struct Node {
        Tensor output;
        std::function<void()> fn;
    };
    std::vector<Node> nodes_;
};

// ---- construction ----------------------------------------------------------

Tensor tensor_zeros(std::vector<size_t> shape, bool requires_grad = false);
Tensor tensor_full(std::vector<size_t> shape, double value, bool requires_grad = false);
Tensor tensor_from(std::vector<size_t> shape, std::vector<double> values,
                   bool requires_grad = false);
Tensor tensor_scalar(double value, bool requires_grad = false);

std::string shape_str(const TensorData& t);

// ---- differentiable ops ----------------------------------------------------
// Every op takes the tape first; pass nullptr for inference (no recording,
// outputs carry requires_grad = false).

// C[m x n] = A[m x k] * B[k x n]
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
// C[m x n] = A[m x k] * B[n x k]^T
Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b);
// Transpose as a copy (no stride tricks at toy scale).
Tensor transpose(Tape* tape, const Tensor& a);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
// Adds a [n]-vector to every row of a [m x n] tensor.
Tensor add_rowvec(Tape* tape, const Tensor& a, const Tensor& bias);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double c);
// tanh-approximation GELU.
Tensor gelu(Tape* tape, const Tensor& a);
Tensor sum_all(Tape* tape, const Tensor& a);

// Row-wise layer normalization over the last dimension, then affine.
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Row-wise softmax over the last dimension with an additive {0, -inf} mask.
// Masked entries are exactly 0 in the output. mask may be null (no masking)
// or must match x's shape. A fully masked row raises DegenerateRowError.
Tensor masked_softmax(Tape* tape, const Tensor& logits, const Tensor& mask);

// -log softmax(logits)[target] for a 1-D logits tensor.
Tensor cross_entropy(Tape* tape, const Tensor& logits, size_t target);

// out[i, :] = table[ids[i], :]
Tensor gather_rows(Tape* tape, const Tensor& table, const std::vector<int>& ids);
// out[:, j] = x[:, cols[j]]
Tensor gather_cols(Tape* tape, const Tensor& x, const std::vector<size_t>& cols);
Tensor slice_rows(Tape* tape, const Tensor& x, size_t begin, size_t end);
// Same data, new shape (copy with pass-through gradient).
Tensor reshape(Tape* tape, const Tensor& x, std::vector<size_t> new_shape);
Tensor slice_cols(Tape* tape, const Tensor& x, size_t begin, size_t end);
Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts);

// Replaces rows[i] of x with replacement[i, :]; the replacement values are
// treated as constants (no gradient flows into them).
Tensor row_overwrite(Tape* tape, const Tensor& x, const std::vector<size_t>& rows,
                     const std::vector<std::vector<double>>& replacements);

// Seeds root->grad = 1 and replays the tape in reverse. root must be scalar
// and produced under this tape. Gradients accumulate until zeroed.
void backward(const Tensor& root, Tape& tape);

bool all_finite(const TensorData& t);

// ---- raw kernels (shared by forward and backward paths) --------------------
namespace kern {
// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
             bool accumulate);
// C[m x n] (+)= A[m x k] * B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
             bool accumulate);
// C[k x n] (+)= A[m x k]^T * B[m x n]
void gemm_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
             bool accumulate);
}  // namespace kern

}  // namespace ordlab
