#pragma once

#include "tgx/autodiff.hpp"
#include "tgx/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace tgx {

// Edge inclusion probabilities and the sampled relaxed/hard masks for one window.
struct EdgeMask {
    Vec p;       // inclusion probabilities, padded rows at 1e-6
    Vec m_soft;  // binary-Concrete sample in (0,1), padded rows 0
    Vec m_hard;  // thresholded sample, exactly Bernoulli(p) marginally
    double tau = 1.0;
};

// Curriculum-annealed Bernoulli prior rate r.
struct PriorSchedule {
    double r_init = 0.9;
    double r_target = 0.7;
    double step = 0.1;
    int epochs_per_step = 10;
    double current_r = 0.9;
};

inline double update_prior(PriorSchedule& s, int epoch) {
    s.current_r = std::max(s.r_target, s.r_init - s.step * (epoch / s.epochs_per_step));
    return s.current_r;
}

// Two-layer scorer mapping edge representations to inclusion logits.
struct ScorerParams {
    Mat W1, b1;  // d x h, 1 x h
    Mat W2, b2;  // h x 1, 1 x 1

    static ScorerParams init(int d, int h, Rng& rng) {
        ScorerParams p;
        auto fan_in_uniform = [&rng](Mat& m, int fan_in) {
            double s = std::sqrt(1.0 / std::max(1, fan_in));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = s * (2.0 * rng.uniform() - 1.0);
        };
        p.W1.resize(d, h);
        fan_in_uniform(p.W1, d);
        p.b1 = Mat::Zero(1, h);
        p.W2.resize(h, 1);
        fan_in_uniform(p.W2, h);
        p.b2 = Mat::Zero(1, 1);
        return p;
    }
};

struct ScorerRefs { ad::Var W1, b1, W2, b2; };
inline ScorerRefs bind(ad::Tape& t, ScorerParams& p) {
    return {t.leaf(&p.W1), t.leaf(&p.b1), t.leaf(&p.W2), t.leaf(&p.b2)};
}

constexpr double kPadProb = 1e-6;

// p_e = sigmoid(MLP(h_e)) per row; padded rows clamped to 1e-6.
inline ad::Var edge_probabilities(ad::Tape& t, ad::Var h, const ScorerRefs& refs, const Mat& real_indicator) {
    ad::Var a = ad::relu(t, ad::affine_rows(t, h, refs.W1, refs.b1));
    ad::Var logits = ad::affine_rows(t, a, refs.W2, refs.b2);
    ad::Var p = ad::sigmoid(t, logits);
    ad::Var real = t.constant(real_indicator);
    Mat pad_fill = (1.0 - real_indicator.array()).matrix() * kPadProb;
    return ad::add(t, ad::hadamard(t, p, real), t.constant(pad_fill));
}

// Binary-Concrete relaxation: m = sigmoid((logit(p) + g) / tau) with logistic
// noise g. Thresholding m at 0.5 recovers an exact Bernoulli(p) draw.
inline ad::Var sample_mask(ad::Tape& t, ad::Var p, const Mat& gumbel_noise, double tau,
                           const Mat& real_indicator, bool hard) {
    require(tau > 0.0, "sample_mask: tau must be positive");
    ad::Var pc = ad::clamp(t, p, 1e-6, 1.0 - 1e-6);  // p clipped before logs
    ad::Var logit = ad::sub(t, ad::log_op(t, pc), ad::log_op(t, ad::rsub_const(t, 1.0, pc)));
    ad::Var shifted = ad::add(t, logit, t.constant(gumbel_noise));
    ad::Var soft = ad::sigmoid(t, ad::scale(t, shifted, 1.0 / tau));
    ad::Var m = hard ? ad::straight_through(t, soft) : soft;
    return ad::hadamard(t, m, t.constant(real_indicator));  // padded rows carry mask 0
}

// Plain-value sampler for evaluation and statistical tests; same arithmetic
// as the tape path.
inline EdgeMask sample_mask_values(const Vec& p, double tau, Rng& rng,
                                   const std::vector<bool>& pad_mask = {}) {
    require(tau > 0.0, "sample_mask: tau must be positive");
    EdgeMask m;
    m.tau = tau;
    Eigen::Index L = p.size();
    m.p = p;
    m.m_soft = Vec::Zero(L);
    m.m_hard = Vec::Zero(L);
    for (Eigen::Index i = 0; i < L; ++i) {
        double g = rng.logistic();
        if (!pad_mask.empty() && !pad_mask[static_cast<std::size_t>(i)]) continue;
        double pc = std::clamp(p(i), 1e-6, 1.0 - 1e-6);
        double logit = std::log(pc) - std::log(1.0 - pc);
        double soft = 1.0 / (1.0 + std::exp(-(logit + g) / tau));
        m.m_soft(i) = soft;
        m.m_hard(i) = soft > 0.5 ? 1.0 : 0.0;
    }
    return m;
}

// Closed-form KL between the factorized Bernoulli posterior and the rate-r prior:
// sum_e p log(p/r) + (1-p) log((1-p)/(1-r)) over real rows.
inline ad::Var compression_loss(ad::Tape& t, ad::Var p, const Mat& real_indicator, double r) {
    require(r > 0.0 && r < 1.0, "compression_loss: prior degenerate, r must lie in (0,1)");
    ad::Var pc = ad::clamp(t, p, 1e-6, 1.0 - 1e-6);
    ad::Var one_minus = ad::rsub_const(t, 1.0, pc);
    double log_r = std::log(r), log_1r = std::log(1.0 - r);
    ad::Var pos = ad::hadamard(t, pc, ad::add_const(t, ad::log_op(t, pc), -log_r));
    ad::Var neg = ad::hadamard(t, one_minus, ad::add_const(t, ad::log_op(t, one_minus), -log_1r));
    ad::Var per_edge = ad::add(t, pos, neg);
    ad::Var masked = ad::hadamard(t, per_edge, t.constant(real_indicator));
    return ad::sum_all(t, masked);
}

inline double compression_loss_value(const Vec& p, const std::vector<bool>& pad_mask, double r) {
    require(r > 0.0 && r < 1.0, "compression_loss: prior degenerate, r must lie in (0,1)");
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (!pad_mask.empty() && !pad_mask[static_cast<std::size_t>(i)]) continue;
        double pe = std::clamp(p(i), 1e-6, 1.0 - 1e-6);
        total += pe * std::log(pe / r) + (1.0 - pe) * std::log((1.0 - pe) / (1.0 - r));
    }
    return total;
}

// Top-k rows by p with k = round(sparsity * n_real), minimum 1 when any real
// row exists. Ties resolve toward recency (rows are most-recent-last).
inline std::vector<bool> extract_explanation(const Vec& p, const std::vector<bool>& pad_mask, double sparsity) {
    Eigen::Index L = p.size();
    std::vector<int> real;
    for (Eigen::Index i = 0; i < L; ++i)
        if (pad_mask.empty() || pad_mask[static_cast<std::size_t>(i)]) real.push_back(static_cast<int>(i));
    std::vector<bool> out(static_cast<std::size_t>(L), false);
    if (real.empty()) return out;
    long k = std::lround(sparsity * static_cast<double>(real.size()));
    k = std::clamp(k, 1L, static_cast<long>(real.size()));
    std::sort(real.begin(), real.end(), [&](int a, int b) {
        if (p(a) != p(b)) return p(a) > p(b);
        return a > b;  // later row = more recent wins
    });
    for (long i = 0; i < k; ++i) out[static_cast<std::size_t>(real[static_cast<std::size_t>(i)])] = true;
    return out;
}

} // namespace tgx
