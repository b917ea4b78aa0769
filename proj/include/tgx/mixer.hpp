#pragma once

#include "tgx/autodiff.hpp"
#include "tgx/common.hpp"

#include <vector>

namespace tgx {

// Stacked token-mixing / channel-mixing layers over an L x d edge sequence.
// Token mixing acts along the window axis, channel mixing along features.
struct MixerParams {
    struct Layer {
        Mat W1;     // L x h_tok
        Mat W2;     // h_tok x L
        Mat ln1_g, ln1_b;  // 1 x d
        Mat W3;     // d x h_ch
        Mat W4;     // h_ch x d
        Mat ln2_g, ln2_b;  // 1 x d
    };
    std::vector<Layer> layers;
    double ln_eps = 1e-6;

    static MixerParams init(int L, int d, int n_layers, int h_tok, int h_ch, Rng& rng) {
        MixerParams p;
        auto fan_in_uniform = [&rng](Mat& m, int fan_in) {
            double s = std::sqrt(1.0 / std::max(1, fan_in));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = s * (2.0 * rng.uniform() - 1.0);
        };
        for (int l = 0; l < n_layers; ++l) {
            Layer lyr;
            // residual-branch output matrices start at zero: the stack opens
            // as the identity over weighted rows and mixing grows as needed
            lyr.W1 = Mat::Zero(L, h_tok);
            lyr.W2.resize(h_tok, L);
            fan_in_uniform(lyr.W2, L);
            lyr.W3.resize(d, h_ch);
            fan_in_uniform(lyr.W3, d);
            lyr.W4 = Mat::Zero(h_ch, d);
            lyr.ln1_g = Mat::Ones(1, d);
            lyr.ln1_b = Mat::Zero(1, d);
            lyr.ln2_g = Mat::Ones(1, d);
            lyr.ln2_b = Mat::Zero(1, d);
            p.layers.push_back(std::move(lyr));
        }
        return p;
    }
};

struct MixerRefs {
    struct Layer { ad::Var W1, W2, ln1_g, ln1_b, W3, W4, ln2_g, ln2_b; };
    std::vector<Layer> layers;
    double ln_eps = 1e-6;
};

inline MixerRefs bind(ad::Tape& t, MixerParams& p) {
    MixerRefs r;
    r.ln_eps = p.ln_eps;
    for (auto& l : p.layers)
        r.layers.push_back({t.leaf(&l.W1), t.leaf(&l.W2), t.leaf(&l.ln1_g), t.leaf(&l.ln1_b),
                            t.leaf(&l.W3), t.leaf(&l.W4), t.leaf(&l.ln2_g), t.leaf(&l.ln2_b)});
    return r;
}

// Per-call dropout masks, pre-scaled by 1/(1-rate); empty mats disable dropout.
struct MixerDropout {
    std::vector<Mat> token;    // h_tok x d per layer
    std::vector<Mat> channel;  // L x h_ch per layer
};

// Shared encoder. Input rows are scaled by `weights` before layer 1, which
// realizes the subgraph masking at the edge-weight level; the same parameters
// serve the raw window and both masked branches.
inline ad::Var encode(ad::Tape& t, ad::Var z0, ad::Var weights, const MixerRefs& refs,
                      const MixerDropout* dropout = nullptr) {
    require(t.val(z0).allFinite() && t.val(weights).allFinite(), "encode: NaN in input");
    ad::Var x = ad::row_scale(t, z0, weights);
    for (std::size_t l = 0; l < refs.layers.size(); ++l) {
        const auto& lr = refs.layers[l];
        // token mixing
        ad::Var t1 = ad::layer_norm(t, x, lr.ln1_g, lr.ln1_b, refs.ln_eps);
        ad::Var t2 = ad::gelu(t, ad::matmul(t, lr.W2, t1));
        if (dropout && !dropout->token.empty() && dropout->token[l].size() > 0)
            t2 = ad::hadamard(t, t2, t.constant(dropout->token[l]));
        x = ad::add(t, x, ad::matmul(t, lr.W1, t2));
        // channel mixing
        ad::Var c1 = ad::layer_norm(t, x, lr.ln2_g, lr.ln2_b, refs.ln_eps);
        ad::Var c2 = ad::gelu(t, ad::matmul(t, c1, lr.W3));
        if (dropout && !dropout->channel.empty() && dropout->channel[l].size() > 0)
            c2 = ad::hadamard(t, c2, t.constant(dropout->channel[l]));
        x = ad::add(t, x, ad::matmul(t, c2, lr.W4));
    }
    return x;
}

// Arithmetic mean over real (non-padded) rows; zero vector when fully padded.
// The optional per-row weights carry the subgraph mask into the pooled
// representation (layer norm inside the encoder is scale-invariant per row,
// so pooling is where soft edge weights must keep their bite).
inline ad::Var mean_pool(ad::Tape& t, ad::Var h, const Mat& real_indicator) {
    return ad::masked_mean_rows(t, h, real_indicator);
}

inline ad::Var mean_pool(ad::Tape& t, ad::Var h, const Mat& real_indicator, ad::Var weights) {
    return ad::masked_mean_rows(t, ad::row_scale(t, h, weights), real_indicator);
}

inline int default_h_tok(int L) { return std::max(4, L / 2); }
inline int default_h_ch(int d) { return 4 * d; }

} // namespace tgx
