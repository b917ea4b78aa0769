#pragma once

#include "tgx/common.hpp"
#include "tgx/event_store.hpp"
#include "tgx/io.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <unordered_set>
#include <vector>

namespace tgx {

// Configuration for the planted-pattern stream generator.
struct GenConfig {
    int num_nodes = 200;
    long long num_events = 5000;
    double repeat_ratio = 0.66;        // target fraction of events whose pair occurred before
    int num_motif_pairs = 8;           // size of the active "stable" pair pool
    int motif_lifetime = 25;           // firings before a stable pair retires and is replaced
    double transition_burst_rate = 0.5; // probability of opening a wedge->closure bundle at a free slot
    double noise_rate = 0.05;          // target fraction of label-irrelevant filler events
    double false_wedge_share = 0.5;    // fraction of noise events dressed as lone wedge look-alikes
    int stability_cause_depth = 25;    // prior same-pair firings recorded as causes per query
    std::uint64_t seed = 1;
    int d_N = 8;
    int d_E = 8;
};

enum class CauseTag { stability, transition };

// Ground truth: for each generated query event (by stream index), the history
// events that determine it, tagged by mechanism.
struct PlantedTruth {
    struct Cause {
        std::int64_t event_index;
        CauseTag tag;
    };
    std::map<std::int64_t, std::vector<Cause>> causes;

    bool has(std::int64_t query_index) const { return causes.count(query_index) > 0; }
};

struct TruthMask {
    std::vector<bool> mask;  // length L, true on rows that are planted causes
    int n_causes = 0;        // total causes recorded for the query
    int n_in_window = 0;     // causes present in the sampled window
};

namespace detail {

// Distinguishable per-mechanism edge-feature pattern: one active coordinate
// per cause type, the rest is low-amplitude noise. The active coordinate is
// strong enough to survive projection and mixing.
inline void fill_edge_features(Mat& feat, Eigen::Index row, int d_E, int flag, Rng& rng) {
    for (int c = 0; c < d_E; ++c) feat(row, c) = 0.1 * rng.normal();
    if (flag >= 0 && flag < d_E) feat(row, flag) = 3.0;
}

} // namespace detail

inline std::pair<EventStream, PlantedTruth> generate(const GenConfig& cfg) {
    require(cfg.num_nodes >= 4, "infeasible config: num_nodes must be >= 4");
    require(cfg.num_events >= 1, "infeasible config: num_events must be >= 1");
    require(cfg.repeat_ratio >= 0.0 && cfg.repeat_ratio <= 1.0,
            "infeasible config: repeat_ratio must lie in [0,1]");
    require(cfg.noise_rate >= 0.0 && cfg.noise_rate <= 1.0,
            "infeasible config: noise_rate must lie in [0,1]");
    require(cfg.transition_burst_rate >= 0.0,
            "infeasible config: transition_burst_rate must be >= 0");
    require(cfg.repeat_ratio == 0.0 || cfg.num_motif_pairs >= 1,
            "infeasible config: repeat_ratio > 0 requires num_motif_pairs >= 1");
    require(cfg.num_motif_pairs <= cfg.num_nodes / 2,
            "infeasible config: num_motif_pairs must be <= num_nodes/2");
    require(cfg.repeat_ratio + cfg.noise_rate <= 1.0 + 1e-12,
            "infeasible config: repeat_ratio + noise_rate must be <= 1");
    require(cfg.d_E >= 2, "infeasible config: d_E must be >= 2 to carry cause patterns");

    Rng rng(derive_seed(cfg.seed, "synthetic"));

    EventStream s;
    s.num_nodes = cfg.num_nodes;
    s.d_N = cfg.d_N;
    s.d_E = cfg.d_E;
    s.node_features.resize(cfg.num_nodes, cfg.d_N);
    for (int i = 0; i < cfg.num_nodes; ++i)
        for (int c = 0; c < cfg.d_N; ++c) s.node_features(i, c) = rng.normal();
    s.original_ids.resize(static_cast<std::size_t>(cfg.num_nodes));
    for (int i = 0; i < cfg.num_nodes; ++i) s.original_ids[static_cast<std::size_t>(i)] = i;

    // stable pairs on disjoint nodes so each pair's window stays clean
    std::vector<int> perm(static_cast<std::size_t>(cfg.num_nodes));
    for (int i = 0; i < cfg.num_nodes; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = cfg.num_nodes - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)], perm[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
    std::vector<std::pair<int, int>> stable;
    for (int k = 0; k < cfg.num_motif_pairs; ++k)
        stable.emplace_back(perm[static_cast<std::size_t>(2 * k)], perm[static_cast<std::size_t>(2 * k + 1)]);
    std::unordered_set<int> stable_nodes;
    for (auto [a, b] : stable) { stable_nodes.insert(a); stable_nodes.insert(b); }

    std::unordered_set<std::uint64_t> planted_pairs;  // stable + wedge + closure pairs, off-limits for noise
    for (auto [a, b] : stable) planted_pairs.insert(pair_key(a, b));
    std::unordered_set<std::uint64_t> seen_pairs;

    auto draw_node = [&](bool avoid_stable) {
        for (int tries = 0; tries < 4096; ++tries) {
            int n = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.num_nodes)));
            if (!avoid_stable || !stable_nodes.count(n)) return n;
        }
        throw std::runtime_error("infeasible config: cannot draw a non-motif node");
    };
    // fresh = never seen and not reserved by a planted mechanism
    auto draw_fresh_pair = [&](bool avoid_stable) -> std::optional<std::pair<int, int>> {
        for (int tries = 0; tries < 4096; ++tries) {
            int a = draw_node(avoid_stable);
            int b = draw_node(avoid_stable);
            if (a == b) continue;
            std::uint64_t k = pair_key(a, b);
            if (seen_pairs.count(k) || planted_pairs.count(k)) continue;
            return std::make_pair(a, b);
        }
        return std::nullopt;
    };

    PlantedTruth truth;
    s.events.reserve(static_cast<std::size_t>(cfg.num_events));
    s.edge_features.resize(cfg.num_events, cfg.d_E);

    // rotation injects one fresh pair per lifetime firings; keep that freshness
    // budget compatible with the repeat target (repeat_ratio 1 disables rotation)
    int lifetime = cfg.motif_lifetime;
    if (lifetime > 0 && cfg.repeat_ratio >= 1.0 - 1e-12) lifetime = 0;
    else if (lifetime > 0 && cfg.repeat_ratio > 0.0)
        lifetime = std::max(lifetime, static_cast<int>(std::ceil(1.0 / (1.0 - cfg.repeat_ratio))) + 1);

    std::vector<std::vector<std::int64_t>> firings(stable.size());  // per stable pair, stream indices

    struct Bundle {
        int x, y, w;
        int stage = 0;  // 0: emit (x,w); 1: emit (y,w); 2: emit closure (x,y)
        std::int64_t wedge1 = -1, wedge2 = -1;
    };
    std::optional<Bundle> pending;

    double t = 0.0;
    long long repeats = 0, noise_count = 0;
    for (long long i = 0; i < cfg.num_events; ++i) {
        t += rng.exponential(1.0);
        int u = -1, v = -1, flag = -1;
        std::int64_t idx = static_cast<std::int64_t>(i);

        bool want_repeat = static_cast<double>(repeats) < cfg.repeat_ratio * static_cast<double>(i + 1);
        bool want_noise = static_cast<double>(noise_count) < cfg.noise_rate * static_cast<double>(i + 1);

        if (want_repeat && !stable.empty()) {
            std::size_t k = static_cast<std::size_t>(rng.uniform_int(stable.size()));
            u = stable[k].first;
            v = stable[k].second;
            flag = 0;
            auto& f = firings[k];
            if (f.size() >= 2) {
                // the recurrence evidence is the pair's own recent firings
                auto& c = truth.causes[idx];
                std::size_t depth = std::min(f.size(), static_cast<std::size_t>(cfg.stability_cause_depth));
                for (std::size_t j = f.size() - depth; j < f.size(); ++j)
                    c.push_back({f[j], CauseTag::stability});
            }
            f.push_back(idx);
            if (lifetime > 0 && static_cast<int>(f.size()) >= lifetime) {
                // retire the pair; spawn a fresh one in its slot
                stable_nodes.erase(stable[k].first);
                stable_nodes.erase(stable[k].second);
                if (auto np = draw_fresh_pair(true)) {
                    stable[k] = *np;
                    planted_pairs.insert(pair_key(np->first, np->second));
                    stable_nodes.insert(np->first);
                    stable_nodes.insert(np->second);
                    f.clear();
                } else {
                    stable_nodes.insert(stable[k].first);
                    stable_nodes.insert(stable[k].second);
                }
            }
        } else if (pending) {
            Bundle& b = *pending;
            if (b.stage == 0) {
                u = b.x; v = b.w; flag = 1;
                planted_pairs.insert(pair_key(u, v));
                b.wedge1 = idx;
                b.stage = 1;
            } else if (b.stage == 1) {
                u = b.y; v = b.w; flag = 1;
                planted_pairs.insert(pair_key(u, v));
                b.wedge2 = idx;
                b.stage = 2;
            } else {
                u = b.x; v = b.y; flag = -1;
                planted_pairs.insert(pair_key(u, v));
                auto& c = truth.causes[idx];
                c.push_back({b.wedge1, CauseTag::transition});
                c.push_back({b.wedge2, CauseTag::transition});
                pending.reset();
            }
        } else {
            bool open_bundle = !want_noise && rng.uniform() < std::min(1.0, cfg.transition_burst_rate);
            auto fresh = open_bundle ? draw_fresh_pair(true) : std::nullopt;
            if (fresh) {
                int w = -1;
                for (int tries = 0; tries < 4096 && w < 0; ++tries) {
                    int cand = draw_node(true);
                    if (cand != fresh->first && cand != fresh->second &&
                        !seen_pairs.count(pair_key(fresh->first, cand)) &&
                        !planted_pairs.count(pair_key(fresh->first, cand)) &&
                        !seen_pairs.count(pair_key(fresh->second, cand)) &&
                        !planted_pairs.count(pair_key(fresh->second, cand)))
                        w = cand;
                }
                if (w >= 0) {
                    pending = Bundle{fresh->first, fresh->second, w};
                    planted_pairs.insert(pair_key(fresh->first, fresh->second));
                    // emit the first wedge immediately
                    Bundle& b = *pending;
                    u = b.x; v = b.w; flag = 1;
                    planted_pairs.insert(pair_key(u, v));
                    b.wedge1 = idx;
                    b.stage = 1;
                }
            }
            if (u < 0) {
                auto np = draw_fresh_pair(false);
                if (np) {
                    u = np->first; v = np->second;
                    // a share of filler events mimics a lone wedge; real
                    // transition evidence always comes as a matched pair
                    flag = rng.uniform() < cfg.false_wedge_share ? 1 : -1;
                    ++noise_count;
                } else if (!stable.empty()) {
                    // pair space exhausted: fall back to a stable refire
                    std::size_t k = static_cast<std::size_t>(rng.uniform_int(stable.size()));
                    u = stable[k].first; v = stable[k].second; flag = 0;
                    firings[k].push_back(idx);
                } else {
                    throw std::runtime_error("infeasible config: pair space exhausted and no motif pairs to reuse");
                }
            }
        }

        if (seen_pairs.count(pair_key(u, v))) ++repeats;
        seen_pairs.insert(pair_key(u, v));
        Event e;
        e.source = u;
        e.destination = v;
        e.timestamp = t;
        s.events.push_back(e);
        detail::fill_edge_features(s.edge_features, idx, cfg.d_E, flag, rng);
    }

    s.finalize();
    return {std::move(s), std::move(truth)};
}

// Marks which rows of a sampled window are planted causes of its query.
// Causes that fell outside the window are reported, not silently dropped.
inline TruthMask truth_mask(const PlantedTruth& truth, const EgoSubgraph& ego, std::int64_t query_index) {
    auto it = truth.causes.find(query_index);
    require(it != truth.causes.end(),
            "query " + std::to_string(query_index) + " not in truth table");
    TruthMask out;
    out.mask.assign(ego.history.size(), false);
    out.n_causes = static_cast<int>(it->second.size());
    for (const auto& c : it->second) {
        for (std::size_t r = 0; r < ego.history.size(); ++r) {
            if (ego.history[r] == c.event_index) {
                out.mask[r] = true;
                ++out.n_in_window;
                break;
            }
        }
    }
    return out;
}

// --- file formats -------------------------------------------------------------

// Standard event CSV: source,destination,timestamp,state_label,f_1..f_{d_E}
inline void write_events_csv(const std::filesystem::path& path, const EventStream& s) {
    std::string buf;
    buf.reserve(s.events.size() * 64);
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        const Event& e = s.events[i];
        buf += std::to_string(s.original_ids[static_cast<std::size_t>(e.source)]);
        buf += ',';
        buf += std::to_string(s.original_ids[static_cast<std::size_t>(e.destination)]);
        buf += ',';
        buf += io::format_double(e.timestamp);
        buf += ",0";
        for (int c = 0; c < s.d_E; ++c) {
            buf += ',';
            buf += io::format_double(s.edge_features(static_cast<Eigen::Index>(i), c));
        }
        buf += '\n';
    }
    io::write_text_atomic(path, buf);
}

// Node features sidecar (one row per dense node id).
inline void write_node_features_csv(const std::filesystem::path& path, const EventStream& s) {
    std::string buf;
    for (int i = 0; i < s.num_nodes; ++i) {
        for (int c = 0; c < s.d_N; ++c) {
            if (c) buf += ',';
            buf += io::format_double(s.node_features(i, c));
        }
        buf += '\n';
    }
    io::write_text_atomic(path, buf);
}

inline void load_node_features_csv(const std::filesystem::path& path, EventStream& s) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = io::trim(line);
        if (t.empty()) continue;
        auto cells = io::split_csv_line(t);
        std::vector<double> r;
        for (const auto& c : cells) {
            double v;
            require(io::parse_double(c, v), "malformed node feature row in " + path.string());
            r.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    require(static_cast<int>(rows.size()) == s.num_nodes,
            "node feature rows (" + std::to_string(rows.size()) + ") do not match num_nodes (" +
                std::to_string(s.num_nodes) + ")");
    s.d_N = rows.empty() ? 0 : static_cast<int>(rows[0].size());
    s.node_features.resize(s.num_nodes, s.d_N);
    for (int i = 0; i < s.num_nodes; ++i) {
        require(static_cast<int>(rows[static_cast<std::size_t>(i)].size()) == s.d_N,
                "ragged node feature rows in " + path.string());
        for (int c = 0; c < s.d_N; ++c) s.node_features(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
}

// Truth sidecar: `query_index: cause_index:tag, cause_index:tag`
inline void write_truth(const std::filesystem::path& path, const PlantedTruth& truth) {
    std::string buf;
    for (const auto& [q, causes] : truth.causes) {
        buf += std::to_string(q);
        buf += ':';
        for (std::size_t i = 0; i < causes.size(); ++i) {
            buf += i ? ", " : " ";
            buf += std::to_string(causes[i].event_index);
            buf += ':';
            buf += causes[i].tag == CauseTag::stability ? "stability" : "transition";
        }
        buf += '\n';
    }
    io::write_text_atomic(path, buf);
}

inline PlantedTruth load_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());
    PlantedTruth truth;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = io::trim(line);
        if (t.empty()) continue;
        std::size_t colon = t.find(':');
        require(colon != std::string::npos, "malformed truth line: " + t);
        long long q;
        require(io::parse_long(t.substr(0, colon), q), "malformed truth line: " + t);
        auto& causes = truth.causes[q];
        std::string rest = t.substr(colon + 1);
        for (const auto& cell : io::split_csv_line(rest)) {
            std::string c = io::trim(cell);
            if (c.empty()) continue;
            std::size_t sep = c.find(':');
            require(sep != std::string::npos, "malformed truth cause: " + c);
            long long ci;
            require(io::parse_long(c.substr(0, sep), ci), "malformed truth cause: " + c);
            std::string tag = io::trim(c.substr(sep + 1));
            require(tag == "stability" || tag == "transition", "unknown cause tag: " + tag);
            causes.push_back({ci, tag == "stability" ? CauseTag::stability : CauseTag::transition});
        }
    }
    return truth;
}

} // namespace tgx
