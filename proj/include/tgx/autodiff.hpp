#pragma once

#include "tgx/common.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace tgx::ad {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Eigen matrices. Nodes are appended in evaluation
// order, so ids form a topological order and backward() is a single reverse
// scan. Parameter leaves reference external storage (no copies); their
// gradients are read off the tape after backward().
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(const Mat* external) {
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.external = external;
        n.needs_grad = true;
        return {static_cast<int>(nodes_.size()) - 1};
    }

    Var constant(Mat m) {
        nodes_.push_back(Node{});
        nodes_.back().owned = std::move(m);
        return {static_cast<int>(nodes_.size()) - 1};
    }

    Var push(Mat value, bool needs_grad) {
        nodes_.push_back(Node{});
        nodes_.back().owned = std::move(value);
        nodes_.back().needs_grad = needs_grad;
        return {static_cast<int>(nodes_.size()) - 1};
    }

    void set_back(Var v, std::function<void(Tape&)> fn) {
        nodes_[static_cast<std::size_t>(v.id)].back = std::move(fn);
    }

    void set_aux(Var v, Mat aux) { nodes_[static_cast<std::size_t>(v.id)].aux = std::move(aux); }
    const Mat& aux(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].aux; }

    const Mat& val(Var v) const {
        const Node& n = nodes_[static_cast<std::size_t>(v.id)];
        return n.external ? *n.external : n.owned;
    }

    bool wants(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

    // gradient buffer, lazily allocated and zeroed
    Mat& grad(Var v) {
        Node& n = nodes_[static_cast<std::size_t>(v.id)];
        if (n.grad.size() == 0) {
            const Mat& x = n.external ? *n.external : n.owned;
            n.grad = Mat::Zero(x.rows(), x.cols());
        }
        return n.grad;
    }
    bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad.size() != 0; }

    void backward(const std::vector<std::pair<Var, Mat>>& seeds) {
        for (const auto& [v, g] : seeds) grad(v) += g;
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.needs_grad || !n.back || n.grad.size() == 0) continue;
            n.back(*this);
        }
    }

    void backward(Var scalar_root) { backward({{scalar_root, Mat::Ones(1, 1)}}); }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat owned;
        const Mat* external = nullptr;
        Mat grad;
        Mat aux;
        std::function<void(Tape&)> back;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
};

// --- primitives ----------------------------------------------------------------

inline Var matmul(Tape& t, Var a, Var b) {
    bool ng = t.wants(a) || t.wants(b);
    Var y = t.push(t.val(a) * t.val(b), ng);
    if (ng)
        t.set_back(y, [a, b, y](Tape& tp) {
            const Mat& g = tp.grad(y);
            if (tp.wants(a)) tp.grad(a).noalias() += g * tp.val(b).transpose();
            if (tp.wants(b)) tp.grad(b).noalias() += tp.val(a).transpose() * g;
        });
    return y;
}

inline Var add(Tape& t, Var a, Var b) {
    bool ng = t.wants(a) || t.wants(b);
    Var y = t.push(t.val(a) + t.val(b), ng);
    if (ng)
        t.set_back(y, [a, b, y](Tape& tp) {
            const Mat& g = tp.grad(y);
            if (tp.wants(a)) tp.grad(a) += g;
            if (tp.wants(b)) tp.grad(b) += g;
        });
    return y;
}

inline Var sub(Tape& t, Var a, Var b) {
    bool ng = t.wants(a) || t.wants(b);
    Var y = t.push(t.val(a) - t.val(b), ng);
    if (ng)
        t.set_back(y, [a, b, y](Tape& tp) {
            const Mat& g = tp.grad(y);
            if (tp.wants(a)) tp.grad(a) += g;
            if (tp.wants(b)) tp.grad(b) -= g;
        });
    return y;
}

inline Var hadamard(Tape& t, Var a, Var b) {
    bool ng = t.wants(a) || t.wants(b);
    Var y = t.push(t.val(a).cwiseProduct(t.val(b)), ng);
    if (ng)
        t.set_back(y, [a, b, y](Tape& tp) {
            const Mat& g = tp.grad(y);
            if (tp.wants(a)) tp.grad(a) += g.cwiseProduct(tp.val(b));
            if (tp.wants(b)) tp.grad(b) += g.cwiseProduct(tp.val(a));
        });
    return y;
}

inline Var scale(Tape& t, Var a, double c) {
    bool ng = t.wants(a);
    Var y = t.push(t.val(a) * c, ng);
    if (ng)
        t.set_back(y, [a, c, y](Tape& tp) { tp.grad(a) += tp.grad(y) * c; });
    return y;
}

// c - a, elementwise
inline Var rsub_const(Tape& t, double c, Var a) {
    bool ng = t.wants(a);
    Var y = t.push((c - t.val(a).array()).matrix(), ng);
    if (ng)
        t.set_back(y, [a, y](Tape& tp) { tp.grad(a) -= tp.grad(y); });
    return y;
}

inline Var add_const(Tape& t, Var a, double c) {
    bool ng = t.wants(a);
    Var y = t.push((t.val(a).array() + c).matrix(), ng);
    if (ng)
        t.set_back(y, [a, y](Tape& tp) { tp.grad(a) += tp.grad(y); });
    return y;
}

// X (n x in) * W (in x out) + broadcast bias (1 x out)
inline Var affine_rows(Tape& t, Var x, Var w, Var b) {
    const Mat& X = t.val(x);
    const Mat& W = t.val(w);
    const Mat& B = t.val(b);
    require(X.cols() == W.rows(), "affine_rows: input width " + std::to_string(X.cols()) +
                                      " does not match weight rows " + std::to_string(W.rows()));
    require(W.cols() == B.cols() && B.rows() == 1, "affine_rows: bias shape mismatch");
    Mat y = X * W;
    y.rowwise() += B.row(0);
    bool ng = t.wants(x) || t.wants(w) || t.wants(b);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [x, w, b, v](Tape& tp) {
            const Mat& g = tp.grad(v);
            if (tp.wants(x)) tp.grad(x).noalias() += g * tp.val(w).transpose();
            if (tp.wants(w)) tp.grad(w).noalias() += tp.val(x).transpose() * g;
            if (tp.wants(b)) tp.grad(b) += g.colwise().sum();
        });
    return v;
}

// diag(w) * Z with w an (L x 1) column
inline Var row_scale(Tape& t, Var z, Var w) {
    const Mat& Z = t.val(z);
    const Mat& W = t.val(w);
    require(W.cols() == 1 && W.rows() == Z.rows(), "row_scale: weight must be a column matching rows");
    Mat y = Z.array().colwise() * W.col(0).array();
    bool ng = t.wants(z) || t.wants(w);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [z, w, v](Tape& tp) {
            const Mat& g = tp.grad(v);
            if (tp.wants(z)) tp.grad(z) += (g.array().colwise() * tp.val(w).col(0).array()).matrix();
            if (tp.wants(w)) tp.grad(w).col(0) += g.cwiseProduct(tp.val(z)).rowwise().sum();
        });
    return v;
}

// broadcast a (1 x d) row to n rows
inline Var replicate_rows(Tape& t, Var x, Eigen::Index n) {
    const Mat& X = t.val(x);
    require(X.rows() == 1, "replicate_rows: input must be a single row");
    Mat y = X.replicate(n, 1);
    bool ng = t.wants(x);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [x, v](Tape& tp) { tp.grad(x) += tp.grad(v).colwise().sum(); });
    return v;
}

// Per-row layer normalization over columns with learnable gain/bias (1 x d).
inline Var layer_norm(Tape& t, Var z, Var gain, Var bias, double eps) {
    const Mat& Z = t.val(z);
    Eigen::Index n = Z.rows(), d = Z.cols();
    Mat xhat(n, d);
    Mat inv_sigma(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mu = Z.row(i).mean();
        double var = (Z.row(i).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + eps);
        inv_sigma(i, 0) = is;
        xhat.row(i) = ((Z.row(i).array() - mu) * is).matrix();
    }
    Mat y = xhat.array().rowwise() * t.val(gain).row(0).array();
    y.rowwise() += t.val(bias).row(0);
    bool ng = t.wants(z) || t.wants(gain) || t.wants(bias);
    Var v = t.push(std::move(y), ng);
    if (ng) {
        Mat aux(n, d + 1);  // cache [xhat | inv_sigma]
        aux.leftCols(d) = xhat;
        aux.col(d) = inv_sigma;
        t.set_aux(v, std::move(aux));
        t.set_back(v, [z, gain, bias, v, d](Tape& tp) {
            const Mat& g = tp.grad(v);
            const Mat& aux = tp.aux(v);
            auto xh = aux.leftCols(d);
            auto is = aux.col(d);
            if (tp.wants(bias)) tp.grad(bias) += g.colwise().sum();
            if (tp.wants(gain)) tp.grad(gain) += g.cwiseProduct(xh).colwise().sum();
            if (tp.wants(z)) {
                Mat gh = g.array().rowwise() * tp.val(gain).row(0).array();  // d y / d xhat
                Mat& gz = tp.grad(z);
                for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    double m1 = gh.row(i).mean();
                    double m2 = gh.row(i).cwiseProduct(xh.row(i)).mean();
                    gz.row(i) += (is(i, 0) * (gh.row(i).array() - m1 - xh.row(i).array() * m2)).matrix();
                }
            }
        });
    }
    return v;
}

inline Var gelu(Tape& t, Var a) {
    const Mat& X = t.val(a);
    Mat y = X.unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476)); });
    bool ng = t.wants(a);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, v](Tape& tp) {
            const Mat& X = tp.val(a);
            Mat d = X.unaryExpr([](double x) {
                double phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
                double pdf = 0.3989422804014327 * std::exp(-0.5 * x * x);
                return phi + x * pdf;
            });
            tp.grad(a) += tp.grad(v).cwiseProduct(d);
        });
    return v;
}

inline Var relu(Tape& t, Var a) {
    Mat y = t.val(a).cwiseMax(0.0);
    bool ng = t.wants(a);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, v](Tape& tp) {
            Mat d = (tp.val(a).array() > 0.0).cast<double>();
            tp.grad(a) += tp.grad(v).cwiseProduct(d);
        });
    return v;
}

inline Var sigmoid(Tape& t, Var a) {
    Mat y = t.val(a).unaryExpr([](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    bool ng = t.wants(a);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, v](Tape& tp) {
            const Mat& y = tp.val(v);
            tp.grad(a) += tp.grad(v).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
        });
    return v;
}

inline Var log_op(Tape& t, Var a) {
    Mat y = t.val(a).array().log().matrix();
    bool ng = t.wants(a);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, v](Tape& tp) {
            tp.grad(a) += tp.grad(v).cwiseQuotient(tp.val(a));
        });
    return v;
}

inline Var cos_op(Tape& t, Var a) {
    Mat y = t.val(a).array().cos().matrix();
    bool ng = t.wants(a);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, v](Tape& tp) {
            Mat s = tp.val(a).array().sin().matrix();
            tp.grad(a) -= tp.grad(v).cwiseProduct(s);
        });
    return v;
}

// gradient passes only where lo < value < hi
inline Var clamp(Tape& t, Var a, double lo, double hi) {
    Mat y = t.val(a).cwiseMax(lo).cwiseMin(hi);
    bool ng = t.wants(a);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, v, lo, hi](Tape& tp) {
            const Mat& X = tp.val(a);
            Mat pass = ((X.array() > lo) && (X.array() < hi)).cast<double>();
            tp.grad(a) += tp.grad(v).cwiseProduct(pass);
        });
    return v;
}

inline Var concat_cols(Tape& t, Var a, Var b) {
    const Mat& A = t.val(a);
    const Mat& B = t.val(b);
    require(A.rows() == B.rows(), "concat_cols: row mismatch");
    Mat y(A.rows(), A.cols() + B.cols());
    y << A, B;
    bool ng = t.wants(a) || t.wants(b);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, b, v](Tape& tp) {
            const Mat& g = tp.grad(v);
            Eigen::Index ca = tp.val(a).cols();
            if (tp.wants(a)) tp.grad(a) += g.leftCols(ca);
            if (tp.wants(b)) tp.grad(b) += g.rightCols(g.cols() - ca);
        });
    return v;
}

// Mean over real rows (real = indicator(i) != 0); zero vector when none.
inline Var masked_mean_rows(Tape& t, Var z, const Mat& real_indicator) {
    const Mat& Z = t.val(z);
    require(real_indicator.rows() == Z.rows() && real_indicator.cols() == 1,
            "masked_mean_rows: indicator shape mismatch");
    double n_real = real_indicator.sum();
    Mat y;
    if (n_real > 0.0)
        y = (real_indicator.transpose() * Z) / n_real;
    else
        y = Mat::Zero(1, Z.cols());
    bool ng = t.wants(z);
    Var v = t.push(std::move(y), ng);
    if (ng && n_real > 0.0) {
        Mat ind = real_indicator;
        t.set_back(v, [z, v, ind, n_real](Tape& tp) {
            tp.grad(z).noalias() += (ind / n_real) * tp.grad(v);
        });
    }
    return v;
}

inline Var sum_all(Tape& t, Var a) {
    Mat y(1, 1);
    y(0, 0) = t.val(a).sum();
    bool ng = t.wants(a);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [a, v](Tape& tp) {
            tp.grad(a).array() += tp.grad(v)(0, 0);
        });
    return v;
}

// Forward: hard threshold at 0.5. Backward: identity (straight-through).
inline Var straight_through(Tape& t, Var soft) {
    Mat y = (t.val(soft).array() > 0.5).cast<double>();
    bool ng = t.wants(soft);
    Var v = t.push(std::move(y), ng);
    if (ng)
        t.set_back(v, [soft, v](Tape& tp) { tp.grad(soft) += tp.grad(v); });
    return v;
}

inline double scalar(const Tape& t, Var v) { return t.val(v)(0, 0); }

} // namespace tgx::ad
