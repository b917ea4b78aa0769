#pragma once

#include "tgx/autodiff.hpp"
#include "tgx/common.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace tgx {

// Frequency MLP producing the stability assignment p_f from the standardized
// per-edge frequency feature.
struct AssignmentParams {
    Mat W1, b1;  // 1 x h, 1 x h
    Mat W2, b2;  // h x 1, 1 x 1

    static AssignmentParams init(int h, Rng& rng) {
        AssignmentParams p;
        p.W1.resize(1, h);
        for (int j = 0; j < h; ++j) p.W1(0, j) = 2.0 * rng.uniform() - 1.0;
        p.b1 = Mat::Zero(1, h);
        p.W2.resize(h, 1);
        double s = std::sqrt(1.0 / h);
        for (int j = 0; j < h; ++j) p.W2(j, 0) = s * (2.0 * rng.uniform() - 1.0);
        p.b2 = Mat::Zero(1, 1);
        return p;
    }
};

struct AssignmentRefs { ad::Var W1, b1, W2, b2; };
inline AssignmentRefs bind(ad::Tape& t, AssignmentParams& p) {
    return {t.leaf(&p.W1), t.leaf(&p.b1), t.leaf(&p.W2), t.leaf(&p.b2)};
}

// p_f = sigmoid(MLP(h_F)); padded rows forced to 0.5 (their weight is 0 anyway).
inline ad::Var soft_assign(ad::Tape& t, const Mat& freq_std, const AssignmentRefs& refs,
                           const Mat& real_indicator) {
    ad::Var f = t.constant(freq_std);
    ad::Var a = ad::relu(t, ad::affine_rows(t, f, refs.W1, refs.b1));
    ad::Var pf = ad::sigmoid(t, ad::affine_rows(t, a, refs.W2, refs.b2));
    ad::Var real = t.constant(real_indicator);
    Mat pad_fill = (1.0 - real_indicator.array()).matrix() * 0.5;
    return ad::add(t, ad::hadamard(t, pf, real), t.constant(pad_fill));
}

// Adjust (ws, wt) so that ws + wt == total holds bitwise. The plain residual
// can miss by one ulp on round-to-even ties; when ws >= total/2 the
// subtraction is exact (Sterbenz), otherwise ws lives in a lower binade and a
// one-ulp shift of ws breaks the tie phase.
inline void exact_split(double total, double& ws, double& wt) {
    for (int outer = 0; outer < 4; ++outer) {
        wt = total - ws;
        for (int k = 0; k < 4 && ws + wt != total; ++k)
            wt = std::nextafter(wt, ws + wt < total ? std::numeric_limits<double>::infinity()
                                                    : -std::numeric_limits<double>::infinity());
        if (ws + wt == total) return;
        ws = std::nextafter(ws, 0.0);
    }
    ws = 0.0;  // unreachable for finite inputs; keep the identity regardless
    wt = total;
}

// weights_S = p_f (.) m, weights_T = m - weights_S. Computing the transition
// branch as the corrected residual makes weights_S + weights_T == m bitwise.
inline std::pair<ad::Var, ad::Var> split_masks(ad::Tape& t, ad::Var mask, ad::Var p_f) {
    const Mat& m = t.val(mask);
    const Mat& pf = t.val(p_f);
    Mat ws_val = pf.cwiseProduct(m);
    Mat wt_val(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i)
        exact_split(m.data()[i], ws_val.data()[i], wt_val.data()[i]);
    bool ng = t.wants(mask) || t.wants(p_f);
    ad::Var ws = t.push(std::move(ws_val), ng);
    if (ng)
        t.set_back(ws, [mask, p_f, ws](ad::Tape& tp) {
            const Mat& g = tp.grad(ws);
            if (tp.wants(p_f)) tp.grad(p_f) += g.cwiseProduct(tp.val(mask));
            if (tp.wants(mask)) tp.grad(mask) += g.cwiseProduct(tp.val(p_f));
        });
    ad::Var wt = t.push(std::move(wt_val), ng);
    if (ng)
        t.set_back(wt, [mask, ws, wt](ad::Tape& tp) {
            const Mat& g = tp.grad(wt);
            if (tp.wants(mask)) tp.grad(mask) += g;
            tp.grad(ws) -= g;
        });
    return {ws, wt};
}

inline std::pair<Vec, Vec> split_masks_values(const Vec& mask, const Vec& p_f) {
    Vec ws = p_f.cwiseProduct(mask);
    Vec wt(mask.size());
    for (Eigen::Index i = 0; i < mask.size(); ++i) exact_split(mask(i), ws(i), wt(i));
    return {ws, wt};
}

// Stability / transition representations of one window plus its event label.
struct PatternPair {
    Vec h_S;
    Vec h_T;
    double label = 0.0;
};

// Conditional-independence discriminator d_psi over (h_S, h_T, Y).
struct DiscriminatorParams {
    Mat W1, b1;  // (2d+1) x h
    Mat W2, b2;  // h x h
    Mat W3, b3;  // h x 1

    static DiscriminatorParams init(int d, int h, Rng& rng) {
        DiscriminatorParams p;
        auto fan_in_uniform = [&rng](Mat& m, int fan_in) {
            double s = std::sqrt(1.0 / std::max(1, fan_in));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = s * (2.0 * rng.uniform() - 1.0);
        };
        p.W1.resize(2 * d + 1, h);
        fan_in_uniform(p.W1, 2 * d + 1);
        p.b1 = Mat::Zero(1, h);
        p.W2.resize(h, h);
        fan_in_uniform(p.W2, h);
        p.b2 = Mat::Zero(1, h);
        p.W3.resize(h, 1);
        fan_in_uniform(p.W3, h);
        p.b3 = Mat::Zero(1, 1);
        return p;
    }
};

struct DiscriminatorRefs { ad::Var W1, b1, W2, b2, W3, b3; };
inline DiscriminatorRefs bind(ad::Tape& t, DiscriminatorParams& p) {
    return {t.leaf(&p.W1), t.leaf(&p.b1), t.leaf(&p.W2), t.leaf(&p.b2), t.leaf(&p.W3), t.leaf(&p.b3)};
}

// d_psi(h_S, h_T, Y) in (0,1); the label enters as a scalar column.
inline ad::Var discriminator_score(ad::Tape& t, ad::Var h_S, ad::Var h_T, double label,
                                   const DiscriminatorRefs& refs) {
    ad::Var y = t.constant(Mat::Constant(1, 1, label));
    ad::Var in = ad::concat_cols(t, ad::concat_cols(t, h_S, h_T), y);
    ad::Var a1 = ad::relu(t, ad::affine_rows(t, in, refs.W1, refs.b1));
    ad::Var a2 = ad::relu(t, ad::affine_rows(t, a1, refs.W2, refs.b2));
    return ad::sigmoid(t, ad::affine_rows(t, a2, refs.W3, refs.b3));
}

// Same-label partner for each batch member: a within-class permutation with
// derangement preferred; fixed points only when a class has a single usable
// layout. Singleton classes get -1 (skipped).
inline std::vector<int> resample_partners(const std::vector<double>& labels, Rng& rng) {
    std::vector<int> partner(labels.size(), -1);
    std::vector<std::vector<int>> classes;
    std::vector<double> class_label;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::size_t c = 0;
        for (; c < class_label.size(); ++c)
            if (class_label[c] == labels[i]) break;
        if (c == class_label.size()) {
            class_label.push_back(labels[i]);
            classes.emplace_back();
        }
        classes[c].push_back(static_cast<int>(i));
    }
    for (const auto& cls : classes) {
        if (cls.size() < 2) continue;
        std::vector<int> perm(cls.size());
        for (std::size_t i = 0; i < cls.size(); ++i) perm[i] = static_cast<int>(i);
        for (std::size_t i = cls.size() - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
        // repair fixed points by swapping with a neighbor
        for (std::size_t i = 0; i < cls.size(); ++i) {
            if (perm[i] != static_cast<int>(i)) continue;
            std::size_t j = (i + 1) % cls.size();
            std::swap(perm[i], perm[j]);
        }
        for (std::size_t i = 0; i < cls.size(); ++i)
            partner[static_cast<std::size_t>(cls[i])] = cls[static_cast<std::size_t>(perm[i])];
    }
    return partner;
}

struct DisentangleLoss {
    ad::Var loss_for_discriminator;  // BCE, >= 0, minimized over psi
    ad::Var loss_for_encoder;        // E[log d] + E[log(1-d~)] = -BCE, minimized over theta/phi
    int n_pairs = 0;
    int n_skipped = 0;
    bool skipped_all = false;
};

// Adversarial conditional-independence objective. Positives are true pairs
// (h_S, h_T, Y); negatives replace h_T by a same-label batch member's h_T.
// The per-pair convention makes the chance-level discriminator loss 2 log 2.
inline DisentangleLoss disentangle_loss(ad::Tape& t, const std::vector<ad::Var>& h_S,
                                        const std::vector<ad::Var>& h_T,
                                        const std::vector<double>& labels,
                                        const DiscriminatorRefs& refs,
                                        const std::vector<int>& partner) {
    DisentangleLoss out;
    ad::Var acc;
    for (std::size_t i = 0; i < h_S.size(); ++i) {
        if (partner[i] < 0) {
            ++out.n_skipped;
            continue;
        }
        ad::Var d_pos = discriminator_score(t, h_S[i], h_T[i], labels[i], refs);
        ad::Var d_neg = discriminator_score(t, h_S[i], h_T[static_cast<std::size_t>(partner[i])], labels[i], refs);
        ad::Var lp = ad::log_op(t, ad::clamp(t, d_pos, 1e-7, 1.0 - 1e-7));
        ad::Var ln = ad::log_op(t, ad::clamp(t, ad::rsub_const(t, 1.0, d_neg), 1e-7, 1.0 - 1e-7));
        ad::Var pair = ad::add(t, lp, ln);
        acc = acc.valid() ? ad::add(t, acc, pair) : pair;
        ++out.n_pairs;
    }
    if (out.n_pairs == 0) {
        out.loss_for_discriminator = t.constant(Mat::Zero(1, 1));
        out.loss_for_encoder = t.constant(Mat::Zero(1, 1));
        out.skipped_all = true;
        return out;
    }
    ad::Var mean = ad::scale(t, acc, 1.0 / out.n_pairs);  // E[log d] + E[log(1-d~)]
    out.loss_for_encoder = mean;
    out.loss_for_discriminator = ad::scale(t, mean, -1.0);
    return out;
}

} // namespace tgx
