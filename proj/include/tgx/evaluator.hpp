#pragma once

#include "tgx/bottleneck.hpp"
#include "tgx/event_store.hpp"
#include "tgx/io.hpp"
#include "tgx/metrics.hpp"
#include "tgx/model.hpp"
#include "tgx/synthetic.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <thread>
#include <unordered_set>
#include <vector>

namespace tgx {

// Chunked parallel map with deterministic aggregation (results land by index).
inline void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn) {
    if (workers <= 1 || n < 4) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        while (true) {
            std::int64_t i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

struct SparsityCurve {
    std::vector<double> s;
    std::vector<double> value;

    // left-Riemann area; `normalized` divides by the grid span so a
    // constant-1 curve scores 1.0
    double area(bool normalized) const {
        double a = 0.0;
        for (std::size_t j = 0; j + 1 < s.size(); ++j) a += value[j] * (s[j + 1] - s[j]);
        if (!normalized) return a;
        double span = s.empty() ? 1.0 : s.back() - s.front();
        return span > 0.0 ? a / span : 0.0;
    }
};

inline std::vector<double> sparsity_grid(double lo = 0.0, double hi = 0.3, double step = 0.002) {
    std::vector<double> g;
    for (int j = 0;; ++j) {
        double s = lo + step * j;
        if (s > hi + 1e-12) break;
        g.push_back(std::min(s, hi));
    }
    return g;
}

struct EvalOptions {
    int num_negatives = 100;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    std::int64_t max_queries = -1;  // cap for the sparsity-curve protocols, -1 = all
    std::uint64_t seed = 1;
    bool with_seen_unseen = true;
};

struct MrrResult {
    double mrr = 0.0, mrr_seen = 0.0, mrr_unseen = 0.0;
    long long n = 0, n_seen = 0, n_unseen = 0;
    bool full_complement = false;  // num_nodes-1 <= num_negatives
};

struct FidelityReport {
    SparsityCurve acc_curve;
    double acc_auc = 0.0;      // normalized by the 0.3 span
    double acc_auc_raw = 0.0;  // plain Riemann sum
    SparsityCurve fid_plus_correct, fid_plus_incorrect, fid_minus_correct, fid_minus_incorrect;
    std::optional<double> aufsc_plus_correct, aufsc_plus_incorrect;
    std::optional<double> aufsc_minus_correct, aufsc_minus_incorrect;
    long long n_correct = 0, n_incorrect = 0;
};

struct EmbeddingRow {
    std::int64_t query_index;
    Vec h_S, h_T, h_E;
    double pc1_S = 0, pc2_S = 0, pc1_T = 0, pc2_T = 0, pc1_E = 0, pc2_E = 0;
    bool projected = false;
};

class Evaluator {
public:
    Evaluator(ModelParams& params, const EventStream& stream, const SplitIndex& split,
              const EvalOptions& opts = {})
        : params_(&params), stream_(&stream), split_(split), opts_(opts) {}

    int window() const { return params_->dims.L; }

    EgoFeatures features_for(int u, int v, double t, double label) const {
        EgoSubgraph ego = sample_ego(*stream_, u, v, t, window());
        EgoFeatures f = featurize(*stream_, ego);
        f.label = label;
        return f;
    }

    double predict(int u, int v, double t) const {
        EgoFeatures f = features_for(u, v, t, 0.0);
        return eval_forward(*params_, f).y_hat;
    }

    // AP over range positives plus one sampled negative per positive.
    double ap(std::int64_t begin, std::int64_t end, std::string_view neg_tag) const {
        std::int64_t n = end - begin;
        std::vector<double> scores(static_cast<std::size_t>(2 * n));
        std::vector<int> labels(static_cast<std::size_t>(2 * n));
        parallel_for(n, opts_.workers, [&](std::int64_t k) {
            std::int64_t i = begin + k;
            const Event& e = stream_->events[static_cast<std::size_t>(i)];
            Rng rng(derive_seed(opts_.seed, neg_tag, static_cast<std::uint64_t>(i)));
            int neg = e.destination;
            while (neg == e.destination || neg == e.source)
                neg = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(stream_->num_nodes)));
            scores[static_cast<std::size_t>(2 * k)] = predict(e.source, e.destination, e.timestamp);
            labels[static_cast<std::size_t>(2 * k)] = 1;
            scores[static_cast<std::size_t>(2 * k + 1)] = predict(e.source, neg, e.timestamp);
            labels[static_cast<std::size_t>(2 * k + 1)] = 0;
        });
        return average_precision(scores, labels);
    }

    // Candidate destinations for one ranking query: distinct, excluding v.
    std::vector<int> sample_candidates(const Event& e, std::int64_t event_index, bool* full_complement) const {
        int pool = stream_->num_nodes - 1;
        if (pool <= opts_.num_negatives) {
            if (full_complement) *full_complement = true;
            std::vector<int> negs;
            for (int c = 0; c < stream_->num_nodes; ++c)
                if (c != e.destination) negs.push_back(c);
            return negs;
        }
        Rng rng(derive_seed(opts_.seed, "mrr_negative", static_cast<std::uint64_t>(event_index)));
        std::vector<int> negs;
        std::unordered_set<int> used{e.destination};
        while (static_cast<int>(negs.size()) < opts_.num_negatives) {
            int c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(stream_->num_nodes)));
            if (used.count(c)) continue;
            used.insert(c);
            negs.push_back(c);
        }
        return negs;
    }

    // MRR with a scoring hook so baseline scorers share the ranking protocol.
    MrrResult mrr_with_scorer(const std::function<double(int u, int v, double t)>& score) const {
        std::int64_t n = split_.test_end - split_.test_begin;
        std::vector<double> rr(static_cast<std::size_t>(n));
        std::vector<char> seen(static_cast<std::size_t>(n));
        MrrResult res;
        std::atomic<bool> full{false};
        parallel_for(n, opts_.workers, [&](std::int64_t k) {
            std::int64_t i = split_.test_begin + k;
            const Event& e = stream_->events[static_cast<std::size_t>(i)];
            bool fc = false;
            std::vector<int> negs = sample_candidates(e, i, &fc);
            if (fc) full = true;
            double true_score = score(e.source, e.destination, e.timestamp);
            std::vector<double> neg_scores(negs.size());
            for (std::size_t c = 0; c < negs.size(); ++c)
                neg_scores[c] = score(e.source, negs[c], e.timestamp);
            rr[static_cast<std::size_t>(k)] = reciprocal_rank(true_score, neg_scores);
            seen[static_cast<std::size_t>(k)] = is_seen(*stream_, e) ? 1 : 0;
        });
        double sum = 0, sum_seen = 0, sum_unseen = 0;
        for (std::int64_t k = 0; k < n; ++k) {
            sum += rr[static_cast<std::size_t>(k)];
            if (seen[static_cast<std::size_t>(k)]) {
                sum_seen += rr[static_cast<std::size_t>(k)];
                ++res.n_seen;
            } else {
                sum_unseen += rr[static_cast<std::size_t>(k)];
                ++res.n_unseen;
            }
        }
        res.n = n;
        res.mrr = n > 0 ? sum / static_cast<double>(n) : 0.0;
        res.mrr_seen = res.n_seen > 0 ? sum_seen / static_cast<double>(res.n_seen) : 0.0;
        res.mrr_unseen = res.n_unseen > 0 ? sum_unseen / static_cast<double>(res.n_unseen) : 0.0;
        res.full_complement = full;
        return res;
    }

    MrrResult mrr() const {
        return mrr_with_scorer([this](int u, int v, double t) { return predict(u, v, t); });
    }

    // Recurrence-only reference scorer: historical pair count before t.
    MrrResult mrr_pair_count_baseline() const {
        return mrr_with_scorer([this](int u, int v, double t) {
            return static_cast<double>(stream_->pair_count_before(u, v, t));
        });
    }

    // The instances evaluated by the explanation protocols: test positives plus
    // one sampled negative each (the AP protocol's instance set).
    struct Instance {
        int u, v;
        double t;
        double label;
        std::int64_t stream_index;  // -1 for sampled negatives
    };

    std::vector<Instance> protocol_instances() const {
        std::vector<Instance> out;
        for (std::int64_t i = split_.test_begin; i < split_.test_end; ++i) {
            const Event& e = stream_->events[static_cast<std::size_t>(i)];
            out.push_back({e.source, e.destination, e.timestamp, 1.0, i});
            Rng rng(derive_seed(opts_.seed, "protocol_negative", static_cast<std::uint64_t>(i)));
            int neg = e.destination;
            while (neg == e.destination || neg == e.source)
                neg = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(stream_->num_nodes)));
            out.push_back({e.source, neg, e.timestamp, 0.0, -1});
        }
        if (opts_.max_queries > 0 && static_cast<std::int64_t>(out.size()) > opts_.max_queries)
            out.resize(static_cast<std::size_t>(opts_.max_queries));
        return out;
    }

    // Edge ranking per instance: descending p, ties toward recency. The hook
    // lets baselines (random masks) reuse the whole fidelity machinery.
    using RankingHook = std::function<std::vector<int>(const EgoFeatures&, const Vec& p, std::int64_t idx)>;

    static std::vector<int> ranking_from_scores(const Vec& scores, const Mat& real_ind) {
        std::vector<int> rows;
        for (Eigen::Index i = 0; i < scores.size(); ++i)
            if (real_ind(i, 0) > 0) rows.push_back(static_cast<int>(i));
        std::sort(rows.begin(), rows.end(), [&](int a, int b) {
            if (scores(a) != scores(b)) return scores(a) > scores(b);
            return a > b;
        });
        return rows;
    }

    // ACC(s) agreement curve and AUFSC necessity/sufficiency in one pass.
    // Reference prediction = full window (all real rows at weight 1).
    FidelityReport fidelity(const RankingHook& ranking_hook = {}) const {
        std::vector<Instance> inst = protocol_instances();
        std::vector<double> grid = sparsity_grid();
        std::size_t m = grid.size();
        std::int64_t n = static_cast<std::int64_t>(inst.size());

        struct Row {
            std::vector<char> agree_kept, flip_removed;
            bool correct = false;
            bool usable = false;
        };
        std::vector<Row> rows(static_cast<std::size_t>(n));

        parallel_for(n, opts_.workers, [&](std::int64_t k) {
            const Instance& q = inst[static_cast<std::size_t>(k)];
            EgoFeatures f = features_for(q.u, q.v, q.t, q.label);
            if (f.n_real == 0) return;
            Row& row = rows[static_cast<std::size_t>(k)];
            row.usable = true;

            Vec ones = f.real_ind.col(0);
            EvalOutput full = eval_forward(*params_, f, &ones);
            bool ref = full.y_hat > 0.5;
            row.correct = (ref == (q.label > 0.5));

            EvalOutput post = eval_forward(*params_, f);
            std::vector<int> order = ranking_hook ? ranking_hook(f, post.p, k)
                                                  : ranking_from_scores(post.p, f.real_ind);

            // cache forwards per distinct k (top-k sets are nested)
            std::vector<char> kept_agree(static_cast<std::size_t>(f.n_real) + 1, 0);
            std::vector<char> removed_flip(static_cast<std::size_t>(f.n_real) + 1, 0);
            std::vector<char> cached(static_cast<std::size_t>(f.n_real) + 1, 0);
            auto eval_k = [&](long kk) {
                if (cached[static_cast<std::size_t>(kk)]) return;
                Vec kept = Vec::Zero(f.real_ind.rows());
                for (long r = 0; r < kk; ++r) kept(order[static_cast<std::size_t>(r)]) = 1.0;
                Vec removed = ones - kept;
                double y_kept = eval_forward(*params_, f, &kept).y_hat;
                double y_removed = eval_forward(*params_, f, &removed).y_hat;
                kept_agree[static_cast<std::size_t>(kk)] = ((y_kept > 0.5) == ref) ? 1 : 0;
                removed_flip[static_cast<std::size_t>(kk)] = ((y_removed > 0.5) != ref) ? 1 : 0;
                cached[static_cast<std::size_t>(kk)] = 1;
            };
            row.agree_kept.resize(m);
            row.flip_removed.resize(m);
            for (std::size_t j = 0; j < m; ++j) {
                long kk = std::lround(grid[j] * static_cast<double>(f.n_real));
                kk = std::clamp(kk, 1L, static_cast<long>(f.n_real));
                eval_k(kk);
                row.agree_kept[j] = kept_agree[static_cast<std::size_t>(kk)];
                row.flip_removed[j] = removed_flip[static_cast<std::size_t>(kk)];
            }
        });

        FidelityReport rep;
        rep.acc_curve.s = grid;
        rep.acc_curve.value.assign(m, 0.0);
        for (auto* c : {&rep.fid_plus_correct, &rep.fid_plus_incorrect, &rep.fid_minus_correct,
                        &rep.fid_minus_incorrect}) {
            c->s = grid;
            c->value.assign(m, 0.0);
        }
        long long usable = 0;
        for (const Row& row : rows) {
            if (!row.usable) continue;
            ++usable;
            (row.correct ? rep.n_correct : rep.n_incorrect) += 1;
            for (std::size_t j = 0; j < m; ++j) {
                rep.acc_curve.value[j] += row.agree_kept[j];
                auto& plus = row.correct ? rep.fid_plus_correct : rep.fid_plus_incorrect;
                auto& minus = row.correct ? rep.fid_minus_correct : rep.fid_minus_incorrect;
                plus.value[j] += row.flip_removed[j];
                minus.value[j] += row.agree_kept[j];
            }
        }
        require(usable > 0, "fidelity: no usable instances (all windows empty)");
        for (std::size_t j = 0; j < m; ++j) rep.acc_curve.value[j] /= static_cast<double>(usable);
        auto finish = [&](SparsityCurve& c, long long count) -> std::optional<double> {
            if (count == 0) return std::nullopt;  // subset empty: metric absent, not zero
            for (std::size_t j = 0; j < m; ++j) c.value[j] /= static_cast<double>(count);
            return c.area(true);
        };
        rep.aufsc_plus_correct = finish(rep.fid_plus_correct, rep.n_correct);
        rep.aufsc_plus_incorrect = finish(rep.fid_plus_incorrect, rep.n_incorrect);
        rep.aufsc_minus_correct = finish(rep.fid_minus_correct, rep.n_correct);
        rep.aufsc_minus_incorrect = finish(rep.fid_minus_incorrect, rep.n_incorrect);
        rep.acc_auc = rep.acc_curve.area(true);
        rep.acc_auc_raw = rep.acc_curve.area(false);
        return rep;
    }

    // Random-mask explainer baseline: a seeded random permutation replaces the
    // learned ranking.
    FidelityReport fidelity_random_baseline() const {
        std::uint64_t seed = opts_.seed;
        return fidelity([seed](const EgoFeatures& f, const Vec&, std::int64_t idx) {
            std::vector<int> rows;
            for (Eigen::Index i = 0; i < f.real_ind.rows(); ++i)
                if (f.real_ind(i, 0) > 0) rows.push_back(static_cast<int>(i));
            Rng rng(derive_seed(seed, "random_mask", static_cast<std::uint64_t>(idx)));
            for (std::size_t i = rows.size(); i > 1; --i)
                std::swap(rows[i - 1], rows[rng.uniform_int(i)]);
            return rows;
        });
    }

    // Ranking AUC of per-edge scores against planted causes, averaged over
    // test-range queries with at least one in-window cause and both classes.
    struct TruthAucResult {
        double auc = 0.0;
        long long n_queries = 0;
        double coverage = 0.0;  // in-window causes / total causes
    };

    TruthAucResult explanation_truth_auc(const PlantedTruth& truth, bool random_baseline = false) const {
        std::vector<std::int64_t> eligible;
        for (std::int64_t i = split_.test_begin; i < split_.test_end; ++i)
            if (truth.has(i)) eligible.push_back(i);
        std::int64_t n = static_cast<std::int64_t>(eligible.size());
        std::vector<double> aucs(static_cast<std::size_t>(n), -1.0);
        std::vector<double> cov_in(static_cast<std::size_t>(n), 0.0), cov_tot(static_cast<std::size_t>(n), 0.0);
        parallel_for(n, opts_.workers, [&](std::int64_t k) {
            std::int64_t i = eligible[static_cast<std::size_t>(k)];
            const Event& e = stream_->events[static_cast<std::size_t>(i)];
            EgoSubgraph ego = sample_ego(*stream_, e.source, e.destination, e.timestamp, window());
            TruthMask tm = truth_mask(truth, ego, i);
            cov_in[static_cast<std::size_t>(k)] = tm.n_in_window;
            cov_tot[static_cast<std::size_t>(k)] = tm.n_causes;
            if (tm.n_in_window == 0) return;
            EgoFeatures f = featurize(*stream_, ego);
            std::vector<double> scores;
            std::vector<bool> pos;
            if (random_baseline) {
                Rng rng(derive_seed(opts_.seed, "random_truth", static_cast<std::uint64_t>(i)));
                for (Eigen::Index r = 0; r < f.real_ind.rows(); ++r) {
                    if (f.real_ind(r, 0) <= 0) continue;
                    scores.push_back(rng.uniform());
                    pos.push_back(tm.mask[static_cast<std::size_t>(r)]);
                }
            } else {
                EvalOutput out = eval_forward(*params_, f);
                for (Eigen::Index r = 0; r < f.real_ind.rows(); ++r) {
                    if (f.real_ind(r, 0) <= 0) continue;
                    scores.push_back(out.p(r));
                    pos.push_back(tm.mask[static_cast<std::size_t>(r)]);
                }
            }
            bool has_neg = false, has_pos = false;
            for (bool b : pos) (b ? has_pos : has_neg) = true;
            if (!has_pos || !has_neg) return;
            aucs[static_cast<std::size_t>(k)] = ranking_auc(scores, pos);
        });
        TruthAucResult res;
        double sum = 0.0, in_sum = 0.0, tot_sum = 0.0;
        for (std::int64_t k = 0; k < n; ++k) {
            in_sum += cov_in[static_cast<std::size_t>(k)];
            tot_sum += cov_tot[static_cast<std::size_t>(k)];
            if (aucs[static_cast<std::size_t>(k)] >= 0.0) {
                sum += aucs[static_cast<std::size_t>(k)];
                ++res.n_queries;
            }
        }
        require(res.n_queries > 0, "explanation_truth_auc: no eligible queries");
        res.auc = sum / static_cast<double>(res.n_queries);
        res.coverage = tot_sum > 0 ? in_sum / tot_sum : 0.0;
        return res;
    }

    // Latent vectors plus top-2 principal-direction coordinates of the pooled set.
    std::vector<EmbeddingRow> export_embeddings(const std::vector<std::int64_t>& query_indices) const {
        std::vector<EmbeddingRow> out(query_indices.size());
        parallel_for(static_cast<std::int64_t>(query_indices.size()), opts_.workers, [&](std::int64_t k) {
            std::int64_t i = query_indices[static_cast<std::size_t>(k)];
            const Event& e = stream_->events[static_cast<std::size_t>(i)];
            EgoFeatures f = features_for(e.source, e.destination, e.timestamp, 1.0);
            EvalOutput o = eval_forward(*params_, f);
            EmbeddingRow& row = out[static_cast<std::size_t>(k)];
            row.query_index = i;
            row.h_S = o.h_S;
            row.h_T = o.h_T;
            row.h_E = o.h_E;
        });
        if (out.size() >= 3) project_embeddings(out);
        return out;
    }

    static void project_embeddings(std::vector<EmbeddingRow>& rows) {
        Eigen::Index d = rows[0].h_S.size();
        Mat pool(static_cast<Eigen::Index>(3 * rows.size()), d);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            pool.row(static_cast<Eigen::Index>(3 * i)) = rows[i].h_S.transpose();
            pool.row(static_cast<Eigen::Index>(3 * i + 1)) = rows[i].h_T.transpose();
            pool.row(static_cast<Eigen::Index>(3 * i + 2)) = rows[i].h_E.transpose();
        }
        Eigen::RowVectorXd mean = pool.colwise().mean();
        Mat centered = pool.rowwise() - mean;
        Mat cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(pool.rows() - 1));
        Eigen::SelfAdjointEigenSolver<Mat> es(cov);
        Mat basis = Mat::Zero(d, 2);
        basis.col(0) = es.eigenvectors().col(d - 1);
        if (d >= 2) basis.col(1) = es.eigenvectors().col(d - 2);
        // deterministic sign: largest-magnitude component positive
        for (int c = 0; c < 2; ++c) {
            Eigen::Index argmax = 0;
            basis.col(c).cwiseAbs().maxCoeff(&argmax);
            if (basis(argmax, c) < 0) basis.col(c) = -basis.col(c);
        }
        Mat coords = centered * basis;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rows[i].pc1_S = coords(static_cast<Eigen::Index>(3 * i), 0);
            rows[i].pc2_S = coords(static_cast<Eigen::Index>(3 * i), 1);
            rows[i].pc1_T = coords(static_cast<Eigen::Index>(3 * i + 1), 0);
            rows[i].pc2_T = coords(static_cast<Eigen::Index>(3 * i + 1), 1);
            rows[i].pc1_E = coords(static_cast<Eigen::Index>(3 * i + 2), 0);
            rows[i].pc2_E = coords(static_cast<Eigen::Index>(3 * i + 2), 1);
            rows[i].projected = true;
        }
    }

private:
    ModelParams* params_;
    const EventStream* stream_;
    SplitIndex split_;
    EvalOptions opts_;
};

} // namespace tgx
