#pragma once

#include "tgx/autodiff.hpp"
#include "tgx/bottleneck.hpp"
#include "tgx/common.hpp"
#include "tgx/disentangler.hpp"
#include "tgx/ensembler.hpp"
#include "tgx/event_store.hpp"
#include "tgx/features.hpp"
#include "tgx/mixer.hpp"

#include <string>
#include <vector>

namespace tgx {

struct ModelDims {
    int L = 20;
    int d = 172;
    int d_T = 32;
    int d_R = 32;
    int d_N = 0;
    int d_E = 0;
    int n_layers = 1;
    int h_tok = 10;
    int h_ch = 688;
    int h_scorer = 32;
    int h_assign = 8;
    int h_disc = 32;

    static ModelDims make(int L, int d, int d_T, int d_R, int d_N, int d_E, int n_layers) {
        ModelDims m;
        m.L = L;
        m.d = d;
        m.d_T = d_T;
        m.d_R = d_R;
        m.d_N = d_N;
        m.d_E = d_E;
        m.n_layers = n_layers;
        m.h_tok = default_h_tok(L);
        m.h_ch = default_h_ch(d);
        m.h_scorer = d;
        m.h_assign = 8;
        m.h_disc = d;
        return m;
    }

    int proj_in() const { return d_N + d_E + d_T + d_R; }
};

enum class ParamGroup { theta, phi, psi };

// All learnable parameters: encoder theta (features, mixer, scorer, assignment),
// predictor phi (fusion + head), discriminator psi.
struct ModelParams {
    ModelDims dims;
    TimeEncoderParams time_enc;
    RelTimeParams rel_enc;
    ProjectionParams proj;
    MixerParams mixer;
    ScorerParams scorer;
    AssignmentParams assign;
    FusionParams fusion;
    DiscriminatorParams disc;

    static ModelParams init(const ModelDims& dims, std::uint64_t seed) {
        Rng rng(derive_seed(seed, "init"));
        ModelParams p;
        p.dims = dims;
        p.time_enc = TimeEncoderParams::init(dims.d_T);
        p.rel_enc = RelTimeParams::init(dims.d_R, rng);
        p.proj = ProjectionParams::init(dims.proj_in(), dims.d, rng, dims.d_T + dims.d_R);
        p.mixer = MixerParams::init(dims.L, dims.d, dims.n_layers, dims.h_tok, dims.h_ch, rng);
        p.scorer = ScorerParams::init(dims.d, dims.h_scorer, rng);
        p.assign = AssignmentParams::init(dims.h_assign, rng);
        p.fusion = FusionParams::init(dims.d, rng);
        p.disc = DiscriminatorParams::init(dims.d, dims.h_disc, rng);
        return p;
    }

    // Stable visitation order; checkpoints and optimizer state rely on it.
    template <class F>
    void visit(F&& f) {
        f(ParamGroup::theta, "time.w", time_enc.w);
        f(ParamGroup::theta, "rel.W", rel_enc.W);
        f(ParamGroup::theta, "rel.b", rel_enc.b);
        f(ParamGroup::theta, "proj.W", proj.W);
        f(ParamGroup::theta, "proj.b", proj.b);
        for (std::size_t l = 0; l < mixer.layers.size(); ++l) {
            auto& lyr = mixer.layers[l];
            std::string pre = "mixer." + std::to_string(l) + ".";
            f(ParamGroup::theta, pre + "W1", lyr.W1);
            f(ParamGroup::theta, pre + "W2", lyr.W2);
            f(ParamGroup::theta, pre + "ln1_g", lyr.ln1_g);
            f(ParamGroup::theta, pre + "ln1_b", lyr.ln1_b);
            f(ParamGroup::theta, pre + "W3", lyr.W3);
            f(ParamGroup::theta, pre + "W4", lyr.W4);
            f(ParamGroup::theta, pre + "ln2_g", lyr.ln2_g);
            f(ParamGroup::theta, pre + "ln2_b", lyr.ln2_b);
        }
        f(ParamGroup::theta, "scorer.W1", scorer.W1);
        f(ParamGroup::theta, "scorer.b1", scorer.b1);
        f(ParamGroup::theta, "scorer.W2", scorer.W2);
        f(ParamGroup::theta, "scorer.b2", scorer.b2);
        f(ParamGroup::theta, "assign.W1", assign.W1);
        f(ParamGroup::theta, "assign.b1", assign.b1);
        f(ParamGroup::theta, "assign.W2", assign.W2);
        f(ParamGroup::theta, "assign.b2", assign.b2);
        f(ParamGroup::phi, "fusion.Wf", fusion.Wf);
        f(ParamGroup::phi, "fusion.bf", fusion.bf);
        f(ParamGroup::phi, "fusion.Wh1", fusion.Wh1);
        f(ParamGroup::phi, "fusion.bh1", fusion.bh1);
        f(ParamGroup::phi, "fusion.Wh2", fusion.Wh2);
        f(ParamGroup::phi, "fusion.bh2", fusion.bh2);
        f(ParamGroup::psi, "disc.W1", disc.W1);
        f(ParamGroup::psi, "disc.b1", disc.b1);
        f(ParamGroup::psi, "disc.W2", disc.W2);
        f(ParamGroup::psi, "disc.b2", disc.b2);
        f(ParamGroup::psi, "disc.W3", disc.W3);
        f(ParamGroup::psi, "disc.b3", disc.b3);
    }

    std::uint64_t content_hash(ParamGroup group) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        visit([&](ParamGroup g, const std::string& name, Mat& m) {
            if (g != group) return;
            h = fnv1a(name, h);
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                double v = m.data()[i];
                h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof(v)), h);
            }
        });
        return h;
    }
};

// Tape bindings for the non-discriminator parameter groups.
struct ModelRefs {
    TimeEncoderRefs time_enc;
    RelTimeRefs rel_enc;
    ProjectionRefs proj;
    MixerRefs mixer;
    ScorerRefs scorer;
    AssignmentRefs assign;
    FusionRefs fusion;
};

inline ModelRefs bind_model(ad::Tape& t, ModelParams& p) {
    ModelRefs r;
    r.time_enc = bind(t, p.time_enc);
    r.rel_enc = bind(t, p.rel_enc);
    r.proj = bind(t, p.proj);
    r.mixer = bind(t, p.mixer);
    r.scorer = bind(t, p.scorer);
    r.assign = bind(t, p.assign);
    r.fusion = bind(t, p.fusion);
    return r;
}

// Per-example stochastic draws, cached so a rebuilt graph replays bitwise.
struct ExampleNoise {
    Mat gumbel;  // L x 1 logistic noise
    MixerDropout dropout;
    Mat head_dropout;  // 1 x d
};

inline ExampleNoise make_noise(const ModelDims& dims, double dropout_rate, Rng& rng) {
    ExampleNoise n;
    n.gumbel.resize(dims.L, 1);
    for (int i = 0; i < dims.L; ++i) n.gumbel(i, 0) = rng.logistic();
    if (dropout_rate > 0.0) {
        double keep = 1.0 - dropout_rate;
        auto mask = [&](Eigen::Index r, Eigen::Index c) {
            Mat m(r, c);
            for (Eigen::Index i = 0; i < r; ++i)
                for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
            return m;
        };
        for (int l = 0; l < dims.n_layers; ++l) {
            n.dropout.token.push_back(mask(dims.h_tok, dims.d));
            n.dropout.channel.push_back(mask(dims.L, dims.h_ch));
        }
        n.head_dropout = mask(1, dims.d);
    }
    return n;
}

enum class ForwardMode {
    train,    // sampled concrete mask, dropout active
    eval,     // deterministic mask m = p, no dropout
    explain,  // externally supplied binary/real mask weights, no dropout
};

struct ExampleGraph {
    ad::Var z0, H, p, m, p_f, w_S, w_T, h_S, h_T, h_E, y_hat;
    ad::Var loss_pre, loss_com;
};

// Full pipeline of one query window: assemble features, encode the raw window,
// score edges, sample the explanatory mask, split by frequency assignment,
// encode both branches with the shared encoder, fuse, predict.
inline ExampleGraph build_example(ad::Tape& t, const ModelRefs& refs, const EgoFeatures& f,
                                  ForwardMode mode, double tau, double prior_r,
                                  const ExampleNoise* noise, bool hard_mask,
                                  const Vec* explain_weights = nullptr) {
    ExampleGraph g;
    g.z0 = assemble_features(t, f, refs.time_enc, refs.rel_enc, refs.proj);
    const MixerDropout* drop = nullptr;
    const Mat* head_drop = nullptr;
    if (mode == ForwardMode::train && noise && noise->head_dropout.size() > 0) {
        drop = &noise->dropout;
        head_drop = &noise->head_dropout;
    }

    ad::Var raw_weights = t.constant(f.real_ind);
    g.H = encode(t, g.z0, raw_weights, refs.mixer, drop);
    g.p = edge_probabilities(t, g.H, refs.scorer, f.real_ind);

    switch (mode) {
        case ForwardMode::train:
            require(noise != nullptr, "train forward requires sampled noise");
            g.m = sample_mask(t, g.p, noise->gumbel, tau, f.real_ind, hard_mask);
            break;
        case ForwardMode::eval:
            g.m = ad::hadamard(t, g.p, t.constant(f.real_ind));  // posterior mean
            break;
        case ForwardMode::explain:
            require(explain_weights != nullptr, "explain forward requires mask weights");
            g.m = t.constant(explain_weights->cwiseProduct(f.real_ind.col(0)));
            break;
    }

    g.p_f = soft_assign(t, f.freq_std, refs.assign, f.real_ind);
    auto [ws, wt] = split_masks(t, g.m, g.p_f);
    g.w_S = ws;
    g.w_T = wt;

    ad::Var hs = encode(t, g.z0, g.w_S, refs.mixer, drop);
    ad::Var ht = encode(t, g.z0, g.w_T, refs.mixer, drop);
    g.h_S = mean_pool(t, hs, f.real_ind, g.w_S);
    g.h_T = mean_pool(t, ht, f.real_ind, g.w_T);
    g.h_E = fuse(t, g.h_S, g.h_T, refs.fusion);
    g.y_hat = predict(t, g.h_E, refs.fusion, head_drop);
    g.loss_pre = prediction_loss(t, g.y_hat, f.label);
    g.loss_com = compression_loss(t, g.p, f.real_ind, prior_r);
    return g;
}

// Deterministic evaluation forward; returns scalar outputs only.
struct EvalOutput {
    double y_hat = 0.0;
    Vec p;       // edge inclusion probabilities
    Vec p_f;     // stability assignment
    Vec h_S, h_T, h_E;
};

inline EvalOutput eval_forward(ModelParams& params, const EgoFeatures& f,
                               const Vec* explain_weights = nullptr) {
    ad::Tape t;
    ModelRefs refs = bind_model(t, params);
    ExampleGraph g = build_example(t, refs, f,
                                   explain_weights ? ForwardMode::explain : ForwardMode::eval,
                                   1.0, 0.5, nullptr, false, explain_weights);
    EvalOutput out;
    out.y_hat = ad::scalar(t, g.y_hat);
    out.p = t.val(g.p).col(0);
    out.p_f = t.val(g.p_f).col(0);
    out.h_S = t.val(g.h_S).row(0);
    out.h_T = t.val(g.h_T).row(0);
    out.h_E = t.val(g.h_E).row(0);
    return out;
}

} // namespace tgx
