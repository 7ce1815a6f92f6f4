#include "ordlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace ordlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

size_t shape_product(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

void require_matrix(const TensorData& t, const char* who) {
    if (t.shape.size() != 2)
        throw ShapeError(std::string(who) + ": expected rank-2 tensor, got " + shape_str(t));
}

void require_same_shape(const TensorData& a, const TensorData& b, const char* who) {
    if (a.shape != b.shape)
        throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
}

bool want_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs)
        if ((*t)->requires_grad) return true;
    return false;
}

Tensor make_out(std::vector<size_t> shape, bool requires_grad) {
    auto t = std::make_shared<TensorData>();
    t->shape = std::move(shape);
    t->values.assign(shape_product(t->shape), 0.0);
    t->requires_grad = requires_grad;
    return t;
}

}  // namespace

std::string shape_str(const TensorData& t) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < t.shape.size(); ++i) os << (i ? "x" : "") << t.shape[i];
    os << "]";
    return os.str();
}

Tensor tensor_zeros(std::vector<size_t> shape, bool requires_grad) {
    return make_out(std::move(shape), requires_grad);
}

Tensor tensor_full(std::vector<size_t> shape, double value, bool requires_grad) {
    auto t = make_out(std::move(shape), requires_grad);
    std::fill(t->values.begin(), t->values.end(), value);
    return t;
}

Tensor tensor_from(std::vector<size_t> shape, std::vector<double> values, bool requires_grad) {
    auto t = std::make_shared<TensorData>();
    t->shape = std::move(shape);
    if (shape_product(t->shape) != values.size())
        throw ShapeError("tensor_from: shape/value count mismatch");
    t->values = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

Tensor tensor_scalar(double value, bool requires_grad) {
    return tensor_from({1}, {value}, requires_grad);
}

bool all_finite(const TensorData& t) {
    for (double v : t.values)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---- kernels ----------------------------------------------------------------

namespace kern {

void gemm_nn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
             bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
             bool accumulate) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            if (accumulate)
                crow[j] += acc;
            else
                crow[j] = acc;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
             bool accumulate) {
    if (!accumulate) std::fill(c, c + k * n, 0.0);
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace kern

// ---- ops ---------------------------------------------------------------------

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    require_matrix(*a, "matmul");
    require_matrix(*b, "matmul");
    if (a->shape[1] != b->shape[0])
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(*a) + " vs " +
                         shape_str(*b));
    const size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    Tensor out = make_out({m, n}, want_grad(tape, {&a, &b}));
    kern::gemm_nn(a->values.data(), b->values.data(), out->values.data(), m, k, n, false);
    if (out->requires_grad) {
        tape->record(out, [a, b, out, m, k, n] {
            // dA += dC * B^T ; dB += A^T * dC
            if (a->requires_grad) {
                a->ensure_grad();
                kern::gemm_nt(out->grad.data(), b->values.data(), a->grad.data(), m, n, k, true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                kern::gemm_tn(a->values.data(), out->grad.data(), b->grad.data(), m, k, n, true);
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b) {
    require_matrix(*a, "matmul_nt");
    require_matrix(*b, "matmul_nt");
    if (a->shape[1] != b->shape[1])
        throw ShapeError("matmul_nt: inner dimensions disagree, " + shape_str(*a) + " vs " +
                         shape_str(*b));
    const size_t m = a->shape[0], k = a->shape[1], n = b->shape[0];
    Tensor out = make_out({m, n}, want_grad(tape, {&a, &b}));
    kern::gemm_nt(a->values.data(), b->values.data(), out->values.data(), m, k, n, false);
    if (out->requires_grad) {
        tape->record(out, [a, b, out, m, k, n] {
            // C = A B^T: dA += dC * B ; dB += dC^T * A
            if (a->requires_grad) {
                a->ensure_grad();
                kern::gemm_nn(out->grad.data(), b->values.data(), a->grad.data(), m, n, k, true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                kern::gemm_tn(out->grad.data(), a->values.data(), b->grad.data(), m, n, k, true);
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor transpose(Tape* tape, const Tensor& a) {
    require_matrix(*a, "transpose");
    const size_t m = a->shape[0], n = a->shape[1];
    Tensor out = make_out({n, m}, want_grad(tape, {&a}));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out->values[j * m + i] = a->values[i * n + j];
    if (out->requires_grad) {
        tape->record(out, [a, out, m, n] {
            a->ensure_grad();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) a->grad[i * n + j] += out->grad[j * m + i];
        });
        out->ensure_grad();
    }
    return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(*a, *b, "add");
    Tensor out = make_out(a->shape, want_grad(tape, {&a, &b}));
    for (size_t i = 0; i < out->size(); ++i) out->values[i] = a->values[i] + b->values[i];
    if (out->requires_grad) {
        tape->record(out, [a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i];
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor add_rowvec(Tape* tape, const Tensor& a, const Tensor& bias) {
    require_matrix(*a, "add_rowvec");
    if (bias->size() != a->shape[1])
        throw ShapeError("add_rowvec: bias length " + shape_str(*bias) + " vs " + shape_str(*a));
    const size_t m = a->shape[0], n = a->shape[1];
    Tensor out = make_out(a->shape, want_grad(tape, {&a, &bias}));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out->values[i * n + j] = a->values[i * n + j] + bias->values[j];
    if (out->requires_grad) {
        tape->record(out, [a, bias, out, m, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < m * n; ++i) a->grad[i] += out->grad[i];
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (size_t i = 0; i < m; ++i)
                    for (size_t j = 0; j < n; ++j) bias->grad[j] += out->grad[i * n + j];
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(*a, *b, "mul");
    Tensor out = make_out(a->shape, want_grad(tape, {&a, &b}));
    for (size_t i = 0; i < out->size(); ++i) out->values[i] = a->values[i] * b->values[i];
    if (out->requires_grad) {
        tape->record(out, [a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * b->values[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i] * a->values[i];
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& a, double c) {
    Tensor out = make_out(a->shape, want_grad(tape, {&a}));
    for (size_t i = 0; i < out->size(); ++i) out->values[i] = a->values[i] * c;
    if (out->requires_grad) {
        tape->record(out, [a, out, c] {
            a->ensure_grad();
            for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * c;
        });
        out->ensure_grad();
    }
    return out;
}

Tensor gelu(Tape* tape, const Tensor& a) {
    Tensor out = make_out(a->shape, want_grad(tape, {&a}));
    for (size_t i = 0; i < out->size(); ++i) {
        double x = a->values[i];
        double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
        out->values[i] = 0.5 * x * (1.0 + t);
    }
    if (out->requires_grad) {
        tape->record(out, [a, out] {
            a->ensure_grad();
            for (size_t i = 0; i < out->size(); ++i) {
                double x = a->values[i];
                double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
                double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
                double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                a->grad[i] += out->grad[i] * d;
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor sum_all(Tape* tape, const Tensor& a) {
    Tensor out = make_out({1}, want_grad(tape, {&a}));
    double acc = 0.0;
    for (double v : a->values) acc += v;
    out->values[0] = acc;
    if (out->requires_grad) {
        tape->record(out, [a, out] {
            a->ensure_grad();
            for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
        });
        out->ensure_grad();
    }
    return out;
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
    require_matrix(*x, "layer_norm");
    const size_t m = x->shape[0], d = x->shape[1];
    if (gain->size() != d || bias->size() != d)
        throw ShapeError("layer_norm: gain/bias length must match last dim " + shape_str(*x));
    Tensor out = make_out(x->shape, want_grad(tape, {&x, &gain, &bias}));
    // Keep the per-row statistics for the backward pass.
    auto mean = std::make_shared<std::vector<double>>(m);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (size_t i = 0; i < m; ++i) {
        const double* row = x->values.data() + i * d;
        double mu = 0.0;
        for (size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) {
            double c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        double is = 1.0 / std::sqrt(var + eps);
        (*mean)[i] = mu;
        (*inv_std)[i] = is;
        double* orow = out->values.data() + i * d;
        for (size_t j = 0; j < d; ++j)
            orow[j] = (row[j] - mu) * is * gain->values[j] + bias->values[j];
    }
    if (out->requires_grad) {
        tape->record(out, [x, gain, bias, out, mean, inv_std, m, d] {
            for (size_t i = 0; i < m; ++i) {
                const double* row = x->values.data() + i * d;
                const double* go = out->grad.data() + i * d;
                const double mu = (*mean)[i];
                const double is = (*inv_std)[i];
                // xhat_j = (x_j - mu) * is ; out_j = xhat_j * g_j + b_j
                double sum_gxhat = 0.0, sum_g = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    double xhat = (row[j] - mu) * is;
                    double gg = go[j] * gain->values[j];
                    sum_gxhat += gg * xhat;
                    sum_g += gg;
                }
                if (gain->requires_grad) {
                    gain->ensure_grad();
                    for (size_t j = 0; j < d; ++j)
                        gain->grad[j] += go[j] * (row[j] - mu) * is;
                }
                if (bias->requires_grad) {
                    bias->ensure_grad();
                    for (size_t j = 0; j < d; ++j) bias->grad[j] += go[j];
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    double* gx = x->grad.data() + i * d;
                    const double dn = static_cast<double>(d);
                    for (size_t j = 0; j < d; ++j) {
                        double xhat = (row[j] - mu) * is;
                        double gg = go[j] * gain->values[j];
                        gx[j] += is * (gg - sum_g / dn - xhat * sum_gxhat / dn);
                    }
                }
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor masked_softmax(Tape* tape, const Tensor& logits, const Tensor& mask) {
    require_matrix(*logits, "masked_softmax");
    if (mask) require_same_shape(*logits, *mask, "masked_softmax");
    const size_t m = logits->shape[0], n = logits->shape[1];
    Tensor out = make_out(logits->shape, want_grad(tape, {&logits}));
    for (size_t i = 0; i < m; ++i) {
        const double* lrow = logits->values.data() + i * n;
        const double* mrow = mask ? mask->values.data() + i * n : nullptr;
        double mx = kNegInf;
        for (size_t j = 0; j < n; ++j) {
            if (mrow && mrow[j] == kNegInf) continue;
            if (std::isnan(lrow[j]))
                throw NumericError("masked_softmax: non-finite logit at row " + std::to_string(i));
            mx = std::max(mx, lrow[j]);
        }
        if (mx == kNegInf)
            throw DegenerateRowError("masked_softmax: row " + std::to_string(i) +
                                     " is fully masked");
        double denom = 0.0;
        double* orow = out->values.data() + i * n;
        for (size_t j = 0; j < n; ++j) {
            if (mrow && mrow[j] == kNegInf) {
                orow[j] = 0.0;
            } else {
                orow[j] = std::exp(lrow[j] - mx);
                denom += orow[j];
            }
        }
        const double inv = 1.0 / denom;
        for (size_t j = 0; j < n; ++j) orow[j] *= inv;
    }
    if (out->requires_grad) {
        tape->record(out, [logits, mask, out, m, n] {
            logits->ensure_grad();
            for (size_t i = 0; i < m; ++i) {
                const double* p = out->values.data() + i * n;
                const double* gp = out->grad.data() + i * n;
                const double* mrow = mask ? mask->values.data() + i * n : nullptr;
                double dot = 0.0;
                for (size_t j = 0; j < n; ++j) dot += gp[j] * p[j];
                double* gl = logits->grad.data() + i * n;
                for (size_t j = 0; j < n; ++j) {
                    if (mrow && mrow[j] == kNegInf) continue;  // exact zero gradient
                    gl[j] += p[j] * (gp[j] - dot);
                }
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor cross_entropy(Tape* tape, const Tensor& logits, size_t target) {
    if (logits->shape.size() != 1)
        throw ShapeError("cross_entropy: expected rank-1 logits, got " + shape_str(*logits));
    const size_t n = logits->size();
    if (target >= n)
        throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range [0, " +
                         std::to_string(n) + ")");
    double mx = logits->values[0];
    for (double v : logits->values) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits->values) denom += std::exp(v - mx);
    double lse = mx + std::log(denom);
    Tensor out = make_out({1}, want_grad(tape, {&logits}));
    out->values[0] = lse - logits->values[target];
    if (out->requires_grad) {
        tape->record(out, [logits, out, target, mx, lse, n] {
            logits->ensure_grad();
            const double g = out->grad[0];
            for (size_t j = 0; j < n; ++j) {
                double p = std::exp(logits->values[j] - lse);
                logits->grad[j] += g * (p - (j == target ? 1.0 : 0.0));
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor gather_rows(Tape* tape, const Tensor& table, const std::vector<int>& ids) {
    require_matrix(*table, "gather_rows");
    const size_t n = table->shape[0], d = table->shape[1];
    for (int id : ids)
        if (id < 0 || static_cast<size_t>(id) >= n)
            throw IndexError("gather_rows: id " + std::to_string(id) + " out of range [0, " +
                             std::to_string(n) + ")");
    Tensor out = make_out({ids.size(), d}, want_grad(tape, {&table}));
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(table->values.data() + static_cast<size_t>(ids[i]) * d, d,
                    out->values.data() + i * d);
    if (out->requires_grad) {
        auto ids_copy = std::make_shared<std::vector<int>>(ids);
        tape->record(out, [table, out, ids_copy, d] {
            table->ensure_grad();
            for (size_t i = 0; i < ids_copy->size(); ++i) {
                double* dst = table->grad.data() + static_cast<size_t>((*ids_copy)[i]) * d;
                const double* src = out->grad.data() + i * d;
                for (size_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor gather_cols(Tape* tape, const Tensor& x, const std::vector<size_t>& cols) {
    require_matrix(*x, "gather_cols");
    const size_t m = x->shape[0], n = x->shape[1];
    for (size_t c : cols)
        if (c >= n) throw IndexError("gather_cols: column out of range");
    Tensor out = make_out({m, cols.size()}, want_grad(tape, {&x}));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < cols.size(); ++j)
            out->values[i * cols.size() + j] = x->values[i * n + cols[j]];
    if (out->requires_grad) {
        auto cols_copy = std::make_shared<std::vector<size_t>>(cols);
        tape->record(out, [x, out, cols_copy, m, n] {
            x->ensure_grad();
            const size_t w = cols_copy->size();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < w; ++j)
                    x->grad[i * n + (*cols_copy)[j]] += out->grad[i * w + j];
        });
        out->ensure_grad();
    }
    return out;
}

Tensor slice_rows(Tape* tape, const Tensor& x, size_t begin, size_t end) {
    require_matrix(*x, "slice_rows");
    if (begin > end || end > x->shape[0]) throw IndexError("slice_rows: bad range");
    const size_t n = x->shape[1];
    Tensor out = make_out({end - begin, n}, want_grad(tape, {&x}));
    std::copy_n(x->values.data() + begin * n, (end - begin) * n, out->values.data());
    if (out->requires_grad) {
        tape->record(out, [x, out, begin, n] {
            x->ensure_grad();
            for (size_t i = 0; i < out->size(); ++i) x->grad[begin * n + i] += out->grad[i];
        });
        out->ensure_grad();
    }
    return out;
}

Tensor slice_cols(Tape* tape, const Tensor& x, size_t begin, size_t end) {
    require_matrix(*x, "slice_cols");
    if (begin > end || end > x->shape[1]) throw IndexError("slice_cols: bad range");
    const size_t m = x->shape[0], n = x->shape[1], w = end - begin;
    Tensor out = make_out({m, w}, want_grad(tape, {&x}));
    for (size_t i = 0; i < m; ++i)
        std::copy_n(x->values.data() + i * n + begin, w, out->values.data() + i * w);
    if (out->requires_grad) {
        tape->record(out, [x, out, begin, m, n, w] {
            x->ensure_grad();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < w; ++j) x->grad[i * n + begin + j] += out->grad[i * w + j];
        });
        out->ensure_grad();
    }
    return out;
}

Tensor reshape(Tape* tape, const Tensor& x, std::vector<size_t> new_shape) {
    if (shape_product(new_shape) != x->size())
        throw ShapeError("reshape: element count mismatch for " + shape_str(*x));
    Tensor out = make_out(std::move(new_shape), want_grad(tape, {&x}));
    out->values = x->values;
    if (out->requires_grad) {
        tape->record(out, [x, out] {
            x->ensure_grad();
            for (size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
        });
        out->ensure_grad();
    }
    return out;
}

Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const size_t m = parts[0]->shape[0];
    size_t total = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        require_matrix(*p, "concat_cols");
        if (p->shape[0] != m) throw ShapeError("concat_cols: row count mismatch");
        total += p->shape[1];
        rg = rg || (tape && p->requires_grad);
    }
    Tensor out = make_out({m, total}, rg);
    size_t off = 0;
    for (const Tensor& p : parts) {
        const size_t w = p->shape[1];
        for (size_t i = 0; i < m; ++i)
            std::copy_n(p->values.data() + i * w, w, out->values.data() + i * total + off);
        off += w;
    }
    if (out->requires_grad) {
        auto parts_copy = std::make_shared<std::vector<Tensor>>(parts);
        tape->record(out, [parts_copy, out, m, total] {
            size_t off2 = 0;
            for (Tensor& p : *parts_copy) {
                const size_t w = p->shape[1];
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (size_t i = 0; i < m; ++i)
                        for (size_t j = 0; j < w; ++j)
                            p->grad[i * w + j] += out->grad[i * total + off2 + j];
                }
                off2 += w;
            }
        });
        out->ensure_grad();
    }
    return out;
}

Tensor row_overwrite(Tape* tape, const Tensor& x, const std::vector<size_t>& rows,
                     const std::vector<std::vector<double>>& replacements) {
    require_matrix(*x, "row_overwrite");
    if (rows.size() != replacements.size())
        throw ContractError("row_overwrite: rows/replacements length mismatch");
    const size_t m = x->shape[0], n = x->shape[1];
    Tensor out = make_out(x->shape, want_grad(tape, {&x}));
    out->values = x->values;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m) throw IndexError("row_overwrite: row out of range");
        if (replacements[i].size() != n)
            throw ShapeError("row_overwrite: replacement width mismatch");
        std::copy_n(replacements[i].data(), n, out->values.data() + rows[i] * n);
    }
    if (out->requires_grad) {
        auto rows_copy = std::make_shared<std::vector<size_t>>(rows);
        tape->record(out, [x, out, rows_copy, m, n] {
            x->ensure_grad();
            std::vector<bool> patched(m, false);
            for (size_t r : *rows_copy) patched[r] = true;
            for (size_t i = 0; i < m; ++i) {
                if (patched[i]) continue;  // replacements are constants
                for (size_t j = 0; j < n; ++j) x->grad[i * n + j] += out->grad[i * n + j];
            }
        });
        out->ensure_grad();
    }
    return out;
}

void backward(const Tensor& root, Tape& tape) {
    if (!root) throw ContractError("backward: null root");
    if (root->size() != 1)
        throw ContractError("backward: root must be scalar, got " + shape_str(*root));
    if (!root->requires_grad)
        throw ContractError("backward: root was not produced under a recording tape");
    tape.zero_intermediate_grads();
    root->ensure_grad();
    root->grad[0] = 1.0;
    tape.replay_reverse();
}

}  // namespace ordlab
