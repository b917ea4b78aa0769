#pragma once

#include "tgx/common.hpp"
#include "tgx/event_store.hpp"
#include "tgx/model.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace tgx {

struct TrainConfig {
    int batch_size = 200;
    double lr = 1e-4;       // model step
    double disc_lr = 1e-4;  // discriminator step
    int max_epochs = 100;
    int patience = 10;
    double beta = 0.1;
    double gamma = 0.1;
    int L = 20;
    int n_layers = 1;
    double dropout = 0.1;
    double tau = 1.0;
    double r_init = 0.9;
    double r_target = 0.7;
    int d = 172;
    int d_T = 32;
    int d_R = 32;
    std::uint64_t seed = 1;
    bool hard_mask = false;
    bool override_ranges = false;

    void validate() const {
        if (override_ranges) return;
        auto in_set = [](double v, std::initializer_list<double> set) {
            for (double s : set)
                if (std::abs(v - s) < 1e-12) return true;
            return false;
        };
        require(in_set(L, {20, 30, 40, 50, 60}), "L outside tuning range {20,30,40,50,60}; pass the range override to deviate");
        require(in_set(beta, {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0}), "beta outside tuning range {0.1..1.0} (0 = ablation)");
        require(in_set(gamma, {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0}), "gamma outside tuning range {0.1..1.0} (0 = ablation)");
        require(n_layers == 1 || n_layers == 2, "N_layers outside tuning range {1,2}");
        require(in_set(dropout, {0.1, 0.2, 0.3, 0.4, 0.5}), "dropout outside tuning range {0.1..0.5}");
        require(std::abs(tau - 1.0) < 1e-12, "tau is fixed to 1");
        require(batch_size >= 2 && lr > 0.0 && disc_lr > 0.0 && max_epochs >= 1 && patience >= 1,
                "invalid optimizer configuration");
    }
};

// Adam with bias correction; state is kept in parameter visitation order.
class Adam {
public:
    explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Mat*>& params, const std::vector<Mat>& grads) {
        if (m_.empty()) {
            for (Mat* p : params) {
                m_.push_back(Mat::Zero(p->rows(), p->cols()));
                v_.push_back(Mat::Zero(p->rows(), p->cols()));
            }
        }
        ++t_;
        double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Mat& g = grads[i];
            if (g.size() == 0) continue;
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            Mat mhat = m_[i] / c1;
            Mat vhat = v_[i] / c2;
            params[i]->array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
        }
    }

    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long long t_ = 0;
    std::vector<Mat> m_, v_;

private:
};

struct StepReport {
    double l_pre = 0.0;
    double l_com = 0.0;
    double l_dis_enc = 0.0;   // encoder-side value entering the total
    double l_dis_disc = 0.0;  // discriminator BCE before its update
    double total = 0.0;
    int n_examples = 0;
    int n_skipped = 0;
};

struct EpochRow {
    int epoch = 0;
    double l_pre = 0.0, l_com = 0.0, l_dis = 0.0;
    double val_ap = 0.0;
    double r = 0.0;
};

struct QueryExample {
    int u = 0, v = 0;
    double t = 0.0;
    double label = 0.0;
    std::int64_t stream_index = -1;
};

// Gradients aligned with ModelParams::visit order.
struct GradSink {
    std::vector<Mat> grads;

    static GradSink zeros(ModelParams& p) {
        GradSink s;
        p.visit([&](ParamGroup, const std::string&, Mat& m) { s.grads.push_back(Mat::Zero(m.rows(), m.cols())); });
        return s;
    }
};

struct BatchLosses {
    double l_pre = 0.0, l_com = 0.0, l_dis_enc = 0.0, l_dis_disc = 0.0;
    int n_pairs = 0, n_skipped = 0;
    double total(double beta, double gamma) const { return l_pre + beta * l_com + gamma * l_dis_enc; }
};

namespace detail {

struct HarvestTheta {
    // tape leaves in visit order for theta+phi; psi handled on the disc tape
    std::vector<std::pair<ad::Var, Mat*>> slots;
};

inline void collect_model_leaves(ad::Tape& t, ModelParams& p, const ModelRefs& r,
                                 std::vector<ad::Var>& out) {
    // must mirror ModelParams::visit order for theta and phi
    out = {r.time_enc.w, r.rel_enc.W, r.rel_enc.b, r.proj.W, r.proj.b};
    for (const auto& l : r.mixer.layers) {
        out.push_back(l.W1);
        out.push_back(l.W2);
        out.push_back(l.ln1_g);
        out.push_back(l.ln1_b);
        out.push_back(l.W3);
        out.push_back(l.W4);
        out.push_back(l.ln2_g);
        out.push_back(l.ln2_b);
    }
    for (ad::Var v : {r.scorer.W1, r.scorer.b1, r.scorer.W2, r.scorer.b2}) out.push_back(v);
    for (ad::Var v : {r.assign.W1, r.assign.b1, r.assign.W2, r.assign.b2}) out.push_back(v);
    for (ad::Var v : {r.fusion.Wf, r.fusion.bf, r.fusion.Wh1, r.fusion.bh1, r.fusion.Wh2, r.fusion.bh2})
        out.push_back(v);
    (void)t;
    (void)p;
}

inline void collect_disc_leaves(const DiscriminatorRefs& r, std::vector<ad::Var>& out) {
    out = {r.W1, r.b1, r.W2, r.b2, r.W3, r.b3};
}

} // namespace detail

// Forward pass values cached between the two optimization phases of a batch.
struct BatchForward {
    std::vector<Mat> h_S, h_T;  // 1 x d each
    std::vector<double> labels;
    std::vector<double> l_pre, l_com;
};

// Phase A: per-example forward (no backward) caching branch representations.
inline BatchForward batch_forward(ModelParams& params, std::span<const EgoFeatures> feats,
                                  std::span<const ExampleNoise> noise, ForwardMode mode,
                                  double tau, double r, bool hard_mask) {
    BatchForward out;
    out.h_S.reserve(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        ad::Tape t;
        ModelRefs refs = bind_model(t, params);
        ExampleGraph g = build_example(t, refs, feats[i], mode, tau, r,
                                       noise.empty() ? nullptr : &noise[i], hard_mask);
        double lp = ad::scalar(t, g.loss_pre);
        double lc = ad::scalar(t, g.loss_com);
        if (!std::isfinite(lp) || !std::isfinite(lc))
            throw std::runtime_error("NaN loss at batch example " + std::to_string(i));
        out.h_S.push_back(t.val(g.h_S));
        out.h_T.push_back(t.val(g.h_T));
        out.labels.push_back(feats[i].label);
        out.l_pre.push_back(lp);
        out.l_com.push_back(lc);
    }
    return out;
}

// Discriminator objective on cached representations. When `psi_grads` is given
// it receives dBCE/dpsi; when `h_grads_*` are given they receive gradients of
// the encoder-side loss (E[log d] + E[log(1-d~)]) w.r.t. each h.
inline std::pair<double, double> disc_objective(ModelParams& params, const BatchForward& fwd,
                                                const std::vector<int>& partner,
                                                std::vector<Mat>* psi_grads,
                                                std::vector<Mat>* h_grads_S,
                                                std::vector<Mat>* h_grads_T, int* n_skipped) {
    ad::Tape t;
    DiscriminatorRefs dref = bind(t, params.disc);
    std::vector<ad::Var> hs, ht;
    for (std::size_t i = 0; i < fwd.h_S.size(); ++i) {
        hs.push_back(t.leaf(&fwd.h_S[i]));
        ht.push_back(t.leaf(&fwd.h_T[i]));
    }
    DisentangleLoss dl = disentangle_loss(t, hs, ht, fwd.labels, dref, partner);
    double bce = ad::scalar(t, dl.loss_for_discriminator);
    double enc = ad::scalar(t, dl.loss_for_encoder);
    if (n_skipped) *n_skipped = dl.n_skipped;
    if (!dl.skipped_all && (psi_grads || h_grads_S)) {
        if (psi_grads) {
            t.backward(dl.loss_for_discriminator);
            std::vector<ad::Var> leaves;
            detail::collect_disc_leaves(dref, leaves);
            psi_grads->clear();
            for (ad::Var v : leaves) psi_grads->push_back(t.grad(v));
        } else {
            t.backward(dl.loss_for_encoder);
            h_grads_S->clear();
            h_grads_T->clear();
            for (std::size_t i = 0; i < hs.size(); ++i) {
                h_grads_S->push_back(t.has_grad(hs[i]) ? t.grad(hs[i]) : Mat::Zero(1, fwd.h_S[i].cols()));
                h_grads_T->push_back(t.has_grad(ht[i]) ? t.grad(ht[i]) : Mat::Zero(1, fwd.h_T[i].cols()));
            }
        }
    }
    return {bce, enc};
}

// Phase C: rebuild per-example graphs and accumulate theta/phi gradients of
// L_Pre/N + beta L_Com/N + gamma L_DisEnc (the h-gradients arrive as seeds).
inline void batch_model_grads(ModelParams& params, std::span<const EgoFeatures> feats,
                              std::span<const ExampleNoise> noise, ForwardMode mode, double tau,
                              double r, double beta, double gamma, bool hard_mask,
                              const std::vector<Mat>& h_grads_S, const std::vector<Mat>& h_grads_T,
                              std::vector<Mat>& model_grads /* theta+phi, visit order */) {
    double inv_n = 1.0 / static_cast<double>(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        ad::Tape t;
        ModelRefs refs = bind_model(t, params);
        ExampleGraph g = build_example(t, refs, feats[i], mode, tau, r,
                                       noise.empty() ? nullptr : &noise[i], hard_mask);
        std::vector<std::pair<ad::Var, Mat>> seeds;
        seeds.emplace_back(g.loss_pre, Mat::Constant(1, 1, inv_n));
        if (beta != 0.0) seeds.emplace_back(g.loss_com, Mat::Constant(1, 1, beta * inv_n));
        if (gamma != 0.0 && !h_grads_S.empty()) {
            seeds.emplace_back(g.h_S, gamma * h_grads_S[i]);
            seeds.emplace_back(g.h_T, gamma * h_grads_T[i]);
        }
        t.backward(seeds);
        std::vector<ad::Var> leaves;
        detail::collect_model_leaves(t, params, refs, leaves);
        for (std::size_t k = 0; k < leaves.size(); ++k)
            if (t.has_grad(leaves[k])) model_grads[k] += t.grad(leaves[k]);
    }
}

struct FitResult {
    std::vector<EpochRow> log;
    double best_val_ap = -1.0;
    int best_epoch = -1;
    int epochs_run = 0;
    double wall_seconds = 0.0;
};

class Trainer {
public:
    Trainer(const EventStream& stream, const SplitIndex& split, const TrainConfig& cfg)
        : stream_(&stream), split_(split), cfg_(cfg) {
        cfg_.validate();
        dims_ = ModelDims::make(cfg.L, cfg.d, cfg.d_T, cfg.d_R, stream.d_N, stream.d_E, cfg.n_layers);
        params_ = ModelParams::init(dims_, cfg.seed);
        adam_model_ = Adam(cfg.lr);
        adam_disc_ = Adam(cfg.disc_lr);
        schedule_.r_init = cfg.r_init;
        schedule_.r_target = cfg.r_target;
        collect_param_pointers();
    }

    ModelParams& params() { return params_; }
    const ModelDims& dims() const { return dims_; }
    const TrainConfig& config() const { return cfg_; }
    PriorSchedule& schedule() { return schedule_; }
    int epoch_next() const { return epoch_next_; }

    EgoFeatures featurize_query(const QueryExample& q) const {
        EgoSubgraph ego = sample_ego(*stream_, q.u, q.v, q.t, dims_.L);
        EgoFeatures f = featurize(*stream_, ego);
        f.label = q.label;
        f.query_index = q.stream_index;
        return f;
    }

    // Algorithm steps are split so the parameter-partition discipline is
    // independently testable: the discriminator step touches only psi, the
    // model step only theta/phi.
    void discriminator_step(const BatchForward& fwd, const std::vector<int>& partner, StepReport* rep) {
        std::vector<Mat> psi_grads;
        int skipped = 0;
        auto [bce, enc] = disc_objective(params_, fwd, partner, &psi_grads, nullptr, nullptr, &skipped);
        (void)enc;
        if (!psi_grads.empty()) adam_disc_.step(psi_params_, psi_grads);
        if (rep) {
            rep->l_dis_disc = bce;
            rep->n_skipped = skipped;
        }
    }

    void model_step(std::span<const EgoFeatures> feats, std::span<const ExampleNoise> noise,
                    const BatchForward& fwd, const std::vector<int>& partner, StepReport* rep) {
        std::vector<Mat> gS, gT;
        double l_dis_enc = 0.0;
        if (cfg_.gamma != 0.0) {
            auto [bce, enc] = disc_objective(params_, fwd, partner, nullptr, &gS, &gT, nullptr);
            (void)bce;
            l_dis_enc = enc;
        }
        std::vector<Mat> grads;
        for (Mat* p : model_params_) grads.push_back(Mat::Zero(p->rows(), p->cols()));
        batch_model_grads(params_, feats, noise, ForwardMode::train, cfg_.tau, schedule_.current_r,
                          cfg_.beta, cfg_.gamma, cfg_.hard_mask, gS, gT, grads);
        adam_model_.step(model_params_, grads);
        if (rep) {
            double n = static_cast<double>(feats.size());
            double lp = 0.0, lc = 0.0;
            for (double v : fwd.l_pre) lp += v;
            for (double v : fwd.l_com) lc += v;
            rep->l_pre = lp / n;
            rep->l_com = lc / n;
            rep->l_dis_enc = l_dis_enc;
            rep->total = rep->l_pre + cfg_.beta * rep->l_com + cfg_.gamma * rep->l_dis_enc;
            rep->n_examples = static_cast<int>(feats.size());
        }
    }

    StepReport train_step(std::span<const QueryExample> batch, int epoch, int batch_index) {
        std::vector<EgoFeatures> feats;
        feats.reserve(batch.size());
        for (const auto& q : batch) feats.push_back(featurize_query(q));
        Rng noise_rng(derive_seed(cfg_.seed, "mask", key(epoch, batch_index)));
        std::vector<ExampleNoise> noise;
        noise.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
            noise.push_back(make_noise(dims_, cfg_.dropout, noise_rng));

        StepReport rep;
        BatchForward fwd = batch_forward(params_, feats, noise, ForwardMode::train, cfg_.tau,
                                         schedule_.current_r, cfg_.hard_mask);
        Rng resample_rng(derive_seed(cfg_.seed, "resample", key(epoch, batch_index)));
        std::vector<int> partner = resample_partners(fwd.labels, resample_rng);
        discriminator_step(fwd, partner, &rep);
        model_step(feats, noise, fwd, partner, &rep);
        return rep;
    }

    // Validation AP with negatives fixed across epochs (stable model selection).
    double validation_ap();

    FitResult fit(const std::function<void(const EpochRow&)>& on_epoch = {});

    // --- checkpointing ----------------------------------------------------

    void save_checkpoint(const std::filesystem::path& path) const;
    static Trainer load_checkpoint(const std::filesystem::path& path, const EventStream& stream,
                                   const SplitIndex& split);

    std::vector<QueryExample> make_epoch_examples(int epoch) const {
        Rng neg_rng(derive_seed(cfg_.seed, "negative", static_cast<std::uint64_t>(epoch)));
        std::vector<QueryExample> out;
        out.reserve(static_cast<std::size_t>(2 * (split_.train_end - split_.train_begin)));
        for (std::int64_t i = split_.train_begin; i < split_.train_end; ++i) {
            const Event& e = stream_->events[static_cast<std::size_t>(i)];
            out.push_back({e.source, e.destination, e.timestamp, 1.0, i});
            int neg = sample_negative(e, neg_rng);
            out.push_back({e.source, neg, e.timestamp, 0.0, -1});
        }
        return out;
    }

    int sample_negative(const Event& e, Rng& rng) const {
        int neg = e.destination;
        while (neg == e.destination || neg == e.source)
            neg = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(stream_->num_nodes)));
        return neg;
    }

    const EventStream& stream() const { return *stream_; }
    const SplitIndex& split() const { return split_; }

    ModelParams best_params_snapshot() const { return has_best_ ? best_params_ : params_; }

    // internal state exposed for checkpoint round-trip tests
    int stall_ = 0;
    double best_val_ = -std::numeric_limits<double>::infinity();
    int best_epoch_ = -1;
    bool has_best_ = false;

private:
    static std::uint64_t key(int epoch, int batch_index) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(epoch)) << 32) |
               static_cast<std::uint32_t>(batch_index);
    }

    void collect_param_pointers() {
        model_params_.clear();
        psi_params_.clear();
        params_.visit([&](ParamGroup g, const std::string&, Mat& m) {
            if (g == ParamGroup::psi)
                psi_params_.push_back(&m);
            else
                model_params_.push_back(&m);
        });
    }

    const EventStream* stream_;
    SplitIndex split_;
    TrainConfig cfg_;
    ModelDims dims_;
    ModelParams params_;
    ModelParams best_params_;
    Adam adam_model_{1e-4};
    Adam adam_disc_{1e-4};
    PriorSchedule schedule_;
    int epoch_next_ = 0;
    std::vector<Mat*> model_params_;  // theta + phi in visit order
    std::vector<Mat*> psi_params_;

    friend struct TrainerAccess;
};

} // namespace tgx

#include "tgx/trainer_impl.hpp"
