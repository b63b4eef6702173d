#include "genemut/autodiff.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "genemut/errors.hpp"
#include "genemut/kernels.hpp"

namespace genemut::ad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected matrix, got " + t.shape_str());
    }
}

void require_vector(const Tensor& t, const char* op) {
    if (t.rank() != 1) {
        throw DimensionError(std::string(op) + ": expected vector, got " + t.shape_str());
    }
}

void accumulate(Tensor& grad, const Tensor& delta) {
    kernels::active().add(grad.data.data(), delta.data.data(), grad.data.data(),
                          grad.numel());
}

}  // namespace

Tensor matmul_value(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.shape[1] != b.shape[0]) {
        throw DimensionError("matmul: inner dimensions disagree " + a.shape_str() +
                             " vs " + b.shape_str());
    }
    Tensor c(a.shape[0], b.shape[1]);
    kernels::active().gemm_nn(a.shape[0], a.shape[1], b.shape[1], a.data.data(),
                              b.data.data(), c.data.data());
    return c;
}

Tensor softmax_rows_value(const Tensor& m) {
    require_matrix(m, "softmax_rows");
    const std::size_t r = m.shape[0], c = m.shape[1];
    Tensor y(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = kNegInf;
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, m.at(i, j));
        if (mx == kNegInf) {
            throw NumericError("softmax_rows: row " + std::to_string(i) +
                               " is entirely -inf");
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(m.at(i, j) - mx);
            y.at(i, j) = e;
            denom += e;
        }
        for (std::size_t j = 0; j < c; ++j) y.at(i, j) /= denom;
    }
    return y;
}

double sigmoid_value(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    auto node = std::make_unique<Node>();
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad = Tensor::zeros_like(value);
    node->value = std::move(value);
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents,
                 std::function<void()> backprop, bool allow_nonfinite) {
    if (!allow_nonfinite && !value.all_finite()) {
        throw NumericError(std::string(op) + ": non-finite output");
    }
    bool rg = false;
    for (Var p : parents) rg = rg || p->requires_grad;
    auto node = std::make_unique<Node>();
    node->requires_grad = rg;
    if (rg) {
        node->grad = Tensor::zeros_like(value);
        node->backprop = std::move(backprop);
    }
    node->value = std::move(value);
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

void Tape::backward(Var loss) {
    if (consumed_) throw ContractError("backward: tape already consumed");
    if (loss->value.numel() != 1) {
        throw ContractError("backward: seed must be scalar, got " +
                            loss->value.shape_str());
    }
    if (!loss->requires_grad) {
        consumed_ = true;
        backward_visits_ = 0;
        return;  // nothing on the tape depends on parameters
    }
    loss->grad.data[0] = 1.0;
    backward_visits_ = 0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node* n = it->get();
        ++backward_visits_;
        if (n->requires_grad && n->backprop) n->backprop();
    }
    consumed_ = true;
}

Var Tape::add(Var a, Var b) {
    check_same_shape(a->value, b->value, "add");
    Tensor out = Tensor::zeros_like(a->value);
    kernels::active().add(a->value.data.data(), b->value.data.data(),
                          out.data.data(), out.numel());
    Var r = record("add", std::move(out), {a, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r] {
            if (a->requires_grad) accumulate(a->grad, r->grad);
            if (b->requires_grad) accumulate(b->grad, r->grad);
        };
    }
    return r;
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(a->value, b->value, "sub");
    Tensor out = Tensor::zeros_like(a->value);
    kernels::active().sub(a->value.data.data(), b->value.data.data(),
                          out.data.data(), out.numel());
    Var r = record("sub", std::move(out), {a, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r] {
            if (a->requires_grad) accumulate(a->grad, r->grad);
            if (b->requires_grad) {
                kernels::active().axpy(-1.0, r->grad.data.data(),
                                       b->grad.data.data(), r->grad.numel());
            }
        };
    }
    return r;
}

Var Tape::hadamard(Var a, Var b) {
    check_same_shape(a->value, b->value, "hadamard");
    Tensor out = Tensor::zeros_like(a->value);
    kernels::active().mul(a->value.data.data(), b->value.data.data(),
                          out.data.data(), out.numel());
    Var r = record("hadamard", std::move(out), {a, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r] {
            const std::size_t n = r->grad.numel();
            if (a->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    a->grad.data[i] += r->grad.data[i] * b->value.data[i];
                }
            }
            if (b->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    b->grad.data[i] += r->grad.data[i] * a->value.data[i];
                }
            }
        };
    }
    return r;
}

Var Tape::scale(Var a, double s) {
    Tensor out = Tensor::zeros_like(a->value);
    kernels::active().scale(a->value.data.data(), s, out.data.data(), out.numel());
    Var r = record("scale", std::move(out), {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r, s] {
            kernels::active().axpy(s, r->grad.data.data(), a->grad.data.data(),
                                   r->grad.numel());
        };
    }
    return r;
}

Var Tape::add_row_bias(Var m, Var bias) {
    require_matrix(m->value, "add_row_bias");
    require_vector(bias->value, "add_row_bias");
    const std::size_t rws = m->value.shape[0], c = m->value.shape[1];
    if (bias->value.numel() != c) {
        throw DimensionError("add_row_bias: bias length " +
                             std::to_string(bias->value.numel()) +
                             " vs matrix " + m->value.shape_str());
    }
    Tensor out = m->value;
    for (std::size_t i = 0; i < rws; ++i) {
        kernels::active().add(out.data.data() + i * c, bias->value.data.data(),
                              out.data.data() + i * c, c);
    }
    Var r = record("add_row_bias", std::move(out), {m, bias}, nullptr);
    if (r->requires_grad) {
        r->backprop = [m, bias, r, rws, c] {
            if (m->requires_grad) accumulate(m->grad, r->grad);
            if (bias->requires_grad) {
                for (std::size_t i = 0; i < rws; ++i) {
                    kernels::active().add(bias->grad.data.data(),
                                          r->grad.data.data() + i * c,
                                          bias->grad.data.data(), c);
                }
            }
        };
    }
    return r;
}

Var Tape::mul_row_broadcast(Var m, Var v) {
    require_matrix(m->value, "mul_row_broadcast");
    require_vector(v->value, "mul_row_broadcast");
    const std::size_t rws = m->value.shape[0], c = m->value.shape[1];
    if (v->value.numel() != c) {
        throw DimensionError("mul_row_broadcast: vector length " +
                             std::to_string(v->value.numel()) + " vs matrix " +
                             m->value.shape_str());
    }
    Tensor out = Tensor::zeros_like(m->value);
    for (std::size_t i = 0; i < rws; ++i) {
        kernels::active().mul(m->value.data.data() + i * c, v->value.data.data(),
                              out.data.data() + i * c, c);
    }
    Var r = record("mul_row_broadcast", std::move(out), {m, v}, nullptr);
    if (r->requires_grad) {
        r->backprop = [m, v, r, rws, c] {
            for (std::size_t i = 0; i < rws; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double g = r->grad.at(i, j);
                    if (m->requires_grad) m->grad.at(i, j) += g * v->value.data[j];
                    if (v->requires_grad) v->grad.data[j] += g * m->value.at(i, j);
                }
            }
        };
    }
    return r;
}

Var Tape::matmul(Var a, Var b) {
    Tensor out = matmul_value(a->value, b->value);
    Var r = record("matmul", std::move(out), {a, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r] {
            const std::size_t m = a->value.shape[0];
            const std::size_t k = a->value.shape[1];
            const std::size_t n = b->value.shape[1];
            if (a->requires_grad) {
                // dA += dC * B^T
                Tensor bt(n, k);
                kernels::transpose(k, n, b->value.data.data(), bt.data.data());
                Tensor da(m, k);
                kernels::active().gemm_nn(m, n, k, r->grad.data.data(),
                                          bt.data.data(), da.data.data());
                accumulate(a->grad, da);
            }
            if (b->requires_grad) {
                // dB += A^T * dC
                Tensor at(k, m);
                kernels::transpose(m, k, a->value.data.data(), at.data.data());
                Tensor db(k, n);
                kernels::active().gemm_nn(k, m, n, at.data.data(),
                                          r->grad.data.data(), db.data.data());
                accumulate(b->grad, db);
            }
        };
    }
    return r;
}

Var Tape::matmul_nt(Var a, Var b) {
    require_matrix(a->value, "matmul_nt");
    require_matrix(b->value, "matmul_nt");
    if (a->value.shape[1] != b->value.shape[1]) {
        throw DimensionError("matmul_nt: inner dimensions disagree " +
                             a->value.shape_str() + " vs " + b->value.shape_str() +
                             "^T");
    }
    const std::size_t m = a->value.shape[0];
    const std::size_t k = a->value.shape[1];
    const std::size_t n = b->value.shape[0];
    Tensor bt(k, n);
    kernels::transpose(n, k, b->value.data.data(), bt.data.data());
    Tensor out(m, n);
    kernels::active().gemm_nn(m, k, n, a->value.data.data(), bt.data.data(),
                              out.data.data());
    Var r = record("matmul_nt", std::move(out), {a, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r, m, k, n] {
            if (a->requires_grad) {
                // dA += dC * B
                Tensor da(m, k);
                kernels::active().gemm_nn(m, n, k, r->grad.data.data(),
                                          b->value.data.data(), da.data.data());
                accumulate(a->grad, da);
            }
            if (b->requires_grad) {
                // dB += dC^T * A
                Tensor gt(n, m);
                kernels::transpose(m, n, r->grad.data.data(), gt.data.data());
                Tensor db(n, k);
                kernels::active().gemm_nn(n, m, k, gt.data.data(),
                                          a->value.data.data(), db.data.data());
                accumulate(b->grad, db);
            }
        };
    }
    return r;
}

Var Tape::matvec(Var m, Var v) {
    require_matrix(m->value, "matvec");
    require_vector(v->value, "matvec");
    const std::size_t rws = m->value.shape[0], c = m->value.shape[1];
    if (v->value.numel() != c) {
        throw DimensionError("matvec: inner dimensions disagree " +
                             m->value.shape_str() + " vs [" +
                             std::to_string(v->value.numel()) + "]");
    }
    Tensor out = Tensor::vec(rws);
    kernels::active().gemm_nn(rws, c, 1, m->value.data.data(),
                              v->value.data.data(), out.data.data());
    Var r = record("matvec", std::move(out), {m, v}, nullptr);
    if (r->requires_grad) {
        r->backprop = [m, v, r, rws, c] {
            for (std::size_t i = 0; i < rws; ++i) {
                const double g = r->grad.data[i];
                if (m->requires_grad) {
                    kernels::active().axpy(g, v->value.data.data(),
                                           m->grad.data.data() + i * c, c);
                }
                if (v->requires_grad) {
                    kernels::active().axpy(g, m->value.data.data() + i * c,
                                           v->grad.data.data(), c);
                }
            }
        };
    }
    return r;
}

Var Tape::softmax_rows(Var m) {
    Tensor out = softmax_rows_value(m->value);
    Var r = record("softmax_rows", std::move(out), {m}, nullptr);
    if (r->requires_grad) {
        r->backprop = [m, r] {
            const std::size_t rws = r->value.shape[0], c = r->value.shape[1];
            for (std::size_t i = 0; i < rws; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    dot += r->grad.at(i, j) * r->value.at(i, j);
                }
                for (std::size_t j = 0; j < c; ++j) {
                    m->grad.at(i, j) +=
                        r->value.at(i, j) * (r->grad.at(i, j) - dot);
                }
            }
        };
    }
    return r;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    require_matrix(x->value, "layer_norm");
    require_vector(gain->value, "layer_norm gain");
    require_vector(bias->value, "layer_norm bias");
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be > 0");
    const std::size_t rws = x->value.shape[0], c = x->value.shape[1];
    if (gain->value.numel() != c || bias->value.numel() != c) {
        throw DimensionError("layer_norm: gain/bias length must equal " +
                             std::to_string(c));
    }
    Tensor out(rws, c);
    Tensor xhat(rws, c);
    std::vector<double> inv_std(rws);
    for (std::size_t i = 0; i < rws; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += x->value.at(i, j);
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = x->value.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < c; ++j) {
            const double xh = (x->value.at(i, j) - mean) * is;
            xhat.at(i, j) = xh;
            out.at(i, j) = gain->value.data[j] * xh + bias->value.data[j];
        }
    }
    Var r = record("layer_norm", std::move(out), {x, gain, bias}, nullptr);
    if (r->requires_grad) {
        auto xh = std::make_shared<Tensor>(std::move(xhat));
        auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
        r->backprop = [x, gain, bias, r, xh, istd, rws, c] {
            for (std::size_t i = 0; i < rws; ++i) {
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double dy = r->grad.at(i, j);
                    const double dxh = dy * gain->value.data[j];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh->at(i, j);
                    if (gain->requires_grad) gain->grad.data[j] += dy * xh->at(i, j);
                    if (bias->requires_grad) bias->grad.data[j] += dy;
                }
                if (x->requires_grad) {
                    const double n = static_cast<double>(c);
                    for (std::size_t j = 0; j < c; ++j) {
                        const double dxh = r->grad.at(i, j) * gain->value.data[j];
                        x->grad.at(i, j) +=
                            (*istd)[i] *
                            (dxh - sum_dxh / n - xh->at(i, j) * sum_dxh_xh / n);
                    }
                }
            }
        };
    }
    return r;
}

Var Tape::relu(Var x) {
    Tensor out = x->value;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    Var r = record("relu", std::move(out), {x}, nullptr);
    if (r->requires_grad) {
        r->backprop = [x, r] {
            for (std::size_t i = 0; i < r->grad.numel(); ++i) {
                if (x->value.data[i] > 0.0) x->grad.data[i] += r->grad.data[i];
            }
        };
    }
    return r;
}

Var Tape::sigmoid(Var x) {
    Tensor out = x->value;
    for (double& v : out.data) v = sigmoid_value(v);
    Var r = record("sigmoid", std::move(out), {x}, nullptr);
    if (r->requires_grad) {
        r->backprop = [x, r] {
            for (std::size_t i = 0; i < r->grad.numel(); ++i) {
                const double y = r->value.data[i];
                x->grad.data[i] += r->grad.data[i] * y * (1.0 - y);
            }
        };
    }
    return r;
}

Var Tape::rowwise_dot(Var a, Var b) {
    check_same_shape(a->value, b->value, "rowwise_dot");
    require_matrix(a->value, "rowwise_dot");
    const std::size_t rws = a->value.shape[0], c = a->value.shape[1];
    Tensor out = Tensor::vec(rws);
    for (std::size_t i = 0; i < rws; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += a->value.at(i, j) * b->value.at(i, j);
        out.data[i] = acc;
    }
    Var r = record("rowwise_dot", std::move(out), {a, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r, rws, c] {
            for (std::size_t i = 0; i < rws; ++i) {
                const double g = r->grad.data[i];
                if (a->requires_grad) {
                    kernels::active().axpy(g, b->value.data.data() + i * c,
                                           a->grad.data.data() + i * c, c);
                }
                if (b->requires_grad) {
                    kernels::active().axpy(g, a->value.data.data() + i * c,
                                           b->grad.data.data() + i * c, c);
                }
            }
        };
    }
    return r;
}

Var Tape::mean_rows(Var m) {
    require_matrix(m->value, "mean_rows");
    const std::size_t rws = m->value.shape[0], c = m->value.shape[1];
    if (rws == 0) throw DimensionError("mean_rows: empty matrix");
    Tensor out = Tensor::vec(c);
    for (std::size_t i = 0; i < rws; ++i) {
        kernels::active().add(out.data.data(), m->value.data.data() + i * c,
                              out.data.data(), c);
    }
    const double inv = 1.0 / static_cast<double>(rws);
    kernels::active().scale(out.data.data(), inv, out.data.data(), c);
    Var r = record("mean_rows", std::move(out), {m}, nullptr);
    if (r->requires_grad) {
        r->backprop = [m, r, rws, c, inv] {
            for (std::size_t i = 0; i < rws; ++i) {
                kernels::active().axpy(inv, r->grad.data.data(),
                                       m->grad.data.data() + i * c, c);
            }
        };
    }
    return r;
}

Var Tape::sum(Var x) {
    double acc = 0.0;
    for (double v : x->value.data) acc += v;
    Var r = record("sum", Tensor::scalar(acc), {x}, nullptr);
    if (r->requires_grad) {
        r->backprop = [x, r] {
            const double g = r->grad.data[0];
            for (double& gv : x->grad.data) gv += g;
        };
    }
    return r;
}

}  // namespace genemut::ad
