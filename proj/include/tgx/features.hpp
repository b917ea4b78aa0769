#pragma once

#include "tgx/autodiff.hpp"
#include "tgx/common.hpp"
#include "tgx/event_store.hpp"

#include <cmath>

namespace tgx {

// Learnable frequencies of the cosine time encoding.
struct TimeEncoderParams {
    Mat w;  // 1 x d_T

    // geometric frequency ladder spanning ~4 decades
    static TimeEncoderParams init(int d_T) {
        TimeEncoderParams p;
        p.w.resize(1, d_T);
        for (int j = 0; j < d_T; ++j)
            p.w(0, j) = std::pow(10.0, -4.0 * j / std::max(1, d_T));
        return p;
    }
};

// Trainable map from [dt(u), dt(v)] to d_R dimensions: affine + GeLU.
struct RelTimeParams {
    Mat W;  // 2 x d_R
    Mat b;  // 1 x d_R

    static RelTimeParams init(int d_R, Rng& rng) {
        RelTimeParams p;
        p.W.resize(2, d_R);
        double s = std::sqrt(1.0 / 2.0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < d_R; ++j) p.W(i, j) = s * (2.0 * rng.uniform() - 1.0);
        p.b = Mat::Zero(1, d_R);
        return p;
    }
};

// Input projection: concatenated features -> d.
struct ProjectionParams {
    Mat W;  // (d_N + d_E + d_T + d_R) x d
    Mat b;  // 1 x d

    // Time-derived blocks start at a conservative scale: the cosine encoding
    // oscillates per row and would otherwise dominate early representations.
    static ProjectionParams init(int in_dim, int d, Rng& rng, int time_block_rows = 0) {
        ProjectionParams p;
        p.W.resize(in_dim, d);
        double s = std::sqrt(1.0 / std::max(1, in_dim));
        for (int i = 0; i < in_dim; ++i)
            for (int j = 0; j < d; ++j) p.W(i, j) = s * (2.0 * rng.uniform() - 1.0);
        if (time_block_rows > 0 && time_block_rows <= in_dim)
            p.W.bottomRows(time_block_rows) *= 0.1;
        p.b = Mat::Zero(1, d);
        return p;
    }
};

// Constant per-window inputs extracted once from (stream, ego).
struct EgoFeatures {
    Mat node_feat;   // L x d_N, counterpart-node features per history row
    Mat edge_feat;   // L x d_E
    Mat delta_t;     // L x 1, query.t - row.t (0 on padded rows)
    Mat rel_input;   // 1 x 2, [dt(u), dt(v)]
    Mat real_ind;    // L x 1, 1.0 on real rows
    Mat freq_std;    // L x 1, standardized log1p pair frequency
    int n_real = 0;
    std::int64_t query_index = -1;  // stream index when the query is a stream event
    double label = 0.0;
};

// Per-row node features: the history edge's endpoint that is not the shared
// query endpoint; when both endpoints lie in {u, v}, the edge destination.
inline int counterpart_node(const Event& row, int u, int v) {
    bool a_in = row.source == u || row.source == v;
    bool b_in = row.destination == u || row.destination == v;
    if (a_in && !b_in) return row.destination;
    if (b_in && !a_in) return row.source;
    return row.destination;
}

inline EgoFeatures featurize(const EventStream& stream, const EgoSubgraph& ego) {
    const int L = ego.L;
    EgoFeatures f;
    f.node_feat = Mat::Zero(L, stream.d_N);
    f.edge_feat = Mat::Zero(L, stream.d_E);
    f.delta_t = Mat::Zero(L, 1);
    f.real_ind = Mat::Zero(L, 1);
    f.freq_std = Mat::Zero(L, 1);
    f.rel_input.resize(1, 2);
    f.rel_input(0, 0) = ego.delta_u;
    f.rel_input(0, 1) = ego.delta_v;
    f.n_real = ego.n_real;

    for (int i = 0; i < L; ++i) {
        if (!ego.pad_mask[static_cast<std::size_t>(i)]) continue;
        std::int64_t idx = ego.history[static_cast<std::size_t>(i)];
        const Event& e = stream.events[static_cast<std::size_t>(idx)];
        int cp = counterpart_node(e, ego.query.source, ego.query.destination);
        if (stream.d_N > 0) f.node_feat.row(i) = stream.node_features.row(cp);
        if (stream.d_E > 0) f.edge_feat.row(i) = stream.edge_features.row(static_cast<Eigen::Index>(idx));
        f.delta_t(i, 0) = ego.query.timestamp - e.timestamp;
        f.real_ind(i, 0) = 1.0;
    }

    // log1p then per-window z-score over real rows
    if (ego.n_real > 0) {
        double mean = 0.0;
        for (int i = 0; i < L; ++i)
            if (ego.pad_mask[static_cast<std::size_t>(i)])
                mean += std::log1p(static_cast<double>(ego.pair_frequency[static_cast<std::size_t>(i)]));
        mean /= ego.n_real;
        double var = 0.0;
        for (int i = 0; i < L; ++i)
            if (ego.pad_mask[static_cast<std::size_t>(i)]) {
                double z = std::log1p(static_cast<double>(ego.pair_frequency[static_cast<std::size_t>(i)])) - mean;
                var += z * z;
            }
        var /= ego.n_real;
        double sd = std::sqrt(var);
        for (int i = 0; i < L; ++i)
            if (ego.pad_mask[static_cast<std::size_t>(i)]) {
                double z = std::log1p(static_cast<double>(ego.pair_frequency[static_cast<std::size_t>(i)])) - mean;
                f.freq_std(i, 0) = sd > 1e-12 ? z / sd : 0.0;
            }
    }
    return f;
}

// --- tape ops -----------------------------------------------------------------

struct TimeEncoderRefs { ad::Var w; };
struct RelTimeRefs { ad::Var W, b; };
struct ProjectionRefs { ad::Var W, b; };

inline TimeEncoderRefs bind(ad::Tape& t, TimeEncoderParams& p) { return {t.leaf(&p.w)}; }
inline RelTimeRefs bind(ad::Tape& t, RelTimeParams& p) { return {t.leaf(&p.W), t.leaf(&p.b)}; }
inline ProjectionRefs bind(ad::Tape& t, ProjectionParams& p) { return {t.leaf(&p.W), t.leaf(&p.b)}; }

// cos(w_j * dt_i), L x d_T
inline ad::Var time_encode(ad::Tape& t, ad::Var delta_t, const TimeEncoderRefs& refs) {
    return ad::cos_op(t, ad::matmul(t, delta_t, refs.w));
}

// GeLU(affine(log1p([dt(u), dt(v)]))) broadcast to L identical rows. The
// log1p compression keeps activations conditioned across datasets whose
// elapsed times span orders of magnitude.
inline ad::Var relative_time_encode(ad::Tape& t, const Mat& rel_input, const RelTimeRefs& refs, Eigen::Index L) {
    ad::Var compressed = t.constant(rel_input.unaryExpr([](double x) { return std::log1p(std::max(0.0, x)); }));
    ad::Var h = ad::gelu(t, ad::affine_rows(t, compressed, refs.W, refs.b));
    return ad::replicate_rows(t, h, L);
}

// Z0 = proj([X_N, X_E, X_T, X_R]); padded rows forced to exact zero.
inline ad::Var assemble_features(ad::Tape& t, const EgoFeatures& f, const TimeEncoderRefs& time_refs,
                                 const RelTimeRefs& rel_refs, const ProjectionRefs& proj_refs) {
    Eigen::Index L = f.real_ind.rows();
    ad::Var xn = t.constant(f.node_feat);
    ad::Var xe = t.constant(f.edge_feat);
    ad::Var dt = t.constant(f.delta_t);
    ad::Var xt = time_encode(t, dt, time_refs);
    ad::Var xr = relative_time_encode(t, f.rel_input, rel_refs, L);
    ad::Var cat = ad::concat_cols(t, ad::concat_cols(t, xn, xe), ad::concat_cols(t, xt, xr));
    Eigen::Index in_dim = t.val(cat).cols();
    require(in_dim == t.val(proj_refs.W).rows(),
            "assemble_features: concatenated width " + std::to_string(in_dim) +
                " does not match projection rows " + std::to_string(t.val(proj_refs.W).rows()));
    ad::Var z0 = ad::affine_rows(t, cat, proj_refs.W, proj_refs.b);
    ad::Var real = t.constant(f.real_ind);
    return ad::row_scale(t, z0, real);
}

} // namespace tgx
