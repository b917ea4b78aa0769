#pragma once

#include "tgx/autodiff.hpp"
#include "tgx/common.hpp"

#include <cmath>

namespace tgx {

// Fusion map h_E = MLP(h_S || h_T) plus the two-layer prediction head
// (ReLU hidden, logistic output).
struct FusionParams {
    Mat Wf, bf;    // 2d x d, 1 x d
    Mat Wh1, bh1;  // d x d, 1 x d
    Mat Wh2, bh2;  // d x 1, 1 x 1

    static FusionParams init(int d, Rng& rng) {
        FusionParams p;
        auto fan_in_uniform = [&rng](Mat& m, int fan_in) {
            double s = std::sqrt(1.0 / std::max(1, fan_in));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = s * (2.0 * rng.uniform() - 1.0);
        };
        p.Wf.resize(2 * d, d);
        fan_in_uniform(p.Wf, 2 * d);
        p.bf = Mat::Zero(1, d);
        p.Wh1.resize(d, d);
        fan_in_uniform(p.Wh1, d);
        p.bh1 = Mat::Zero(1, d);
        p.Wh2.resize(d, 1);
        fan_in_uniform(p.Wh2, d);
        p.bh2 = Mat::Zero(1, 1);
        return p;
    }
};

struct FusionRefs { ad::Var Wf, bf, Wh1, bh1, Wh2, bh2; };
inline FusionRefs bind(ad::Tape& t, FusionParams& p) {
    return {t.leaf(&p.Wf), t.leaf(&p.bf), t.leaf(&p.Wh1), t.leaf(&p.bh1), t.leaf(&p.Wh2), t.leaf(&p.bh2)};
}

// h_E = affine(h_S || h_T)
inline ad::Var fuse(ad::Tape& t, ad::Var h_S, ad::Var h_T, const FusionRefs& refs) {
    return ad::affine_rows(t, ad::concat_cols(t, h_S, h_T), refs.Wf, refs.bf);
}

// Y_hat = sigmoid(W2 . dropout(ReLU(W1 . h_E)))
inline ad::Var predict(ad::Tape& t, ad::Var h_E, const FusionRefs& refs, const Mat* head_dropout = nullptr) {
    ad::Var a = ad::relu(t, ad::affine_rows(t, h_E, refs.Wh1, refs.bh1));
    if (head_dropout && head_dropout->size() > 0) a = ad::hadamard(t, a, t.constant(*head_dropout));
    return ad::sigmoid(t, ad::affine_rows(t, a, refs.Wh2, refs.bh2));
}

constexpr double kProbClamp = 1e-7;

// Binary cross-entropy with the prediction clamped to [1e-7, 1-1e-7].
inline ad::Var prediction_loss(ad::Tape& t, ad::Var y_hat, double y) {
    ad::Var c = ad::clamp(t, y_hat, kProbClamp, 1.0 - kProbClamp);
    ad::Var pos = ad::scale(t, ad::log_op(t, c), -y);
    ad::Var neg = ad::scale(t, ad::log_op(t, ad::rsub_const(t, 1.0, c)), -(1.0 - y));
    return ad::add(t, pos, neg);
}

inline double prediction_loss_value(double y_hat, double y) {
    double c = std::clamp(y_hat, kProbClamp, 1.0 - kProbClamp);
    return -(y * std::log(c) + (1.0 - y) * std::log(1.0 - c));
}

} // namespace tgx
