#pragma once

#include "tgx/common.hpp"
#include "tgx/io.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <vector>

namespace tgx {

// One timestamped interaction (u, v, t). Edge features live in the stream's
// feature matrix; this is a cheap value view.
struct Event {
    int source = 0;
    int destination = 0;
    double timestamp = 0.0;
};

struct IngestConfig {
    bool has_header = false;
    bool has_state_label = true;  // JODIE-style column after the timestamp
    bool allow_self_loops = true; // self-loops are ingested and counted either way
};

// Unordered pair key for hashing; (a,b) and (b,a) collapse to one key.
inline std::uint64_t pair_key(int a, int b) {
    std::uint32_t lo = static_cast<std::uint32_t>(std::min(a, b));
    std::uint32_t hi = static_cast<std::uint32_t>(std::max(a, b));
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

// Chronologically sorted event stream. Immutable after construction; any
// number of concurrent readers is safe.
class EventStream {
public:
    std::vector<Event> events;
    Mat edge_features;  // num_events x d_E
    Mat node_features;  // num_nodes x d_N (zero rows when the dataset has none)
    int num_nodes = 0;
    int d_N = 0;
    int d_E = 0;

    // ingestion metadata
    std::vector<long long> original_ids;  // dense id -> original id
    long long out_of_order_rows = 0;      // rows reordered by the stable sort
    long long self_loops = 0;

    void finalize() {
        require(!events.empty(), "no events");
        per_node_.assign(num_nodes, {});
        for (std::size_t i = 0; i < events.size(); ++i) {
            per_node_[events[i].source].push_back(static_cast<std::int64_t>(i));
            if (events[i].destination != events[i].source)
                per_node_[events[i].destination].push_back(static_cast<std::int64_t>(i));
        }
        pair_times_.clear();
        pair_times_.reserve(events.size() * 2);
        for (const Event& e : events) pair_times_[pair_key(e.source, e.destination)].push_back(e.timestamp);
    }

    // Event indices touching `node`, in stream order.
    const std::vector<std::int64_t>& incident(int node) const { return per_node_[node]; }

    // Timestamp of the earliest event on the unordered pair, or +inf.
    double first_pair_timestamp(int a, int b) const {
        auto it = pair_times_.find(pair_key(a, b));
        return it == pair_times_.end() ? std::numeric_limits<double>::infinity() : it->second.front();
    }

    // Number of events on the unordered pair strictly before t.
    long long pair_count_before(int a, int b, double t) const {
        auto it = pair_times_.find(pair_key(a, b));
        if (it == pair_times_.end()) return 0;
        const auto& ts = it->second;
        return std::lower_bound(ts.begin(), ts.end(), t) - ts.begin();
    }

private:
    std::vector<std::vector<std::int64_t>> per_node_;
    std::unordered_map<std::uint64_t, std::vector<double>> pair_times_;
};

// The L-most-recent history window around a query event. `pad_mask[i]` is
// true for real rows; short histories are left-padded with zero rows.
struct EgoSubgraph {
    Event query;
    int L = 0;
    int n_real = 0;
    std::vector<std::int64_t> history;  // stream indices, -1 on padded rows, most-recent-last
    std::vector<int> pair_frequency;    // occurrences of each row's pair inside this window
    std::vector<bool> pad_mask;         // true = real row
    double delta_u = 0.0;               // t - last activity of query.source (t if never active)
    double delta_v = 0.0;
};

struct SplitIndex {
    // half-open index intervals over EventStream.events
    std::int64_t train_begin = 0, train_end = 0;
    std::int64_t val_begin = 0, val_end = 0;
    std::int64_t test_begin = 0, test_end = 0;
};

// --- operations -------------------------------------------------------------

inline EventStream ingest_csv(const std::filesystem::path& path, const IngestConfig& cfg = {}) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());

    struct Row {
        long long u, v;
        double t;
        std::vector<double> feat;
        long long line_no;
    };
    std::vector<Row> rows;
    std::string line;
    long long line_no = 0;
    int n_feat = -1;
    bool first_data_row = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && cfg.has_header) continue;
        std::string t = io::trim(line);
        if (t.empty()) continue;
        auto cells = io::split_csv_line(t);
        std::size_t min_cols = cfg.has_state_label ? 4u : 3u;
        if (cells.size() < 3)
            throw std::runtime_error("malformed row at line " + std::to_string(line_no) + " in " + path.string());
        Row r;
        r.line_no = line_no;
        double ts;
        bool ok = io::parse_long(cells[0], r.u) && io::parse_long(cells[1], r.v) && io::parse_double(cells[2], ts);
        if (!ok) throw std::runtime_error("malformed row at line " + std::to_string(line_no) + " in " + path.string());
        r.t = ts;
        std::size_t feat_start = std::min(min_cols, cells.size());
        if (cfg.has_state_label && cells.size() >= 4) {
            double state;
            if (!io::parse_double(cells[3], state))
                throw std::runtime_error("malformed row at line " + std::to_string(line_no) + " in " + path.string());
        }
        for (std::size_t c = feat_start; c < cells.size(); ++c) {
            double f;
            if (!io::parse_double(cells[c], f))
                throw std::runtime_error("malformed row at line " + std::to_string(line_no) + " in " + path.string());
            r.feat.push_back(f);
        }
        if (first_data_row) {
            n_feat = static_cast<int>(r.feat.size());
            first_data_row = false;
        } else if (static_cast<int>(r.feat.size()) != n_feat) {
            throw std::runtime_error("malformed row at line " + std::to_string(line_no) + " in " + path.string() +
                                     ": expected " + std::to_string(n_feat) + " feature columns");
        }
        rows.push_back(std::move(r));
    }
    require(!rows.empty(), "no events");

    EventStream s;
    s.out_of_order_rows = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].t < rows[i - 1].t) ++s.out_of_order_rows;
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });

    std::unordered_map<long long, int> remap;
    auto dense = [&](long long id) {
        auto it = remap.find(id);
        if (it != remap.end()) return it->second;
        int nid = static_cast<int>(s.original_ids.size());
        remap.emplace(id, nid);
        s.original_ids.push_back(id);
        return nid;
    };

    s.d_E = std::max(n_feat, 0);
    s.events.reserve(rows.size());
    s.edge_features.resize(static_cast<Eigen::Index>(rows.size()), s.d_E);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Event e;
        e.source = dense(rows[i].u);
        e.destination = dense(rows[i].v);
        e.timestamp = rows[i].t;
        require(e.timestamp >= 0.0, "negative timestamp at line " + std::to_string(rows[i].line_no));
        if (e.source == e.destination) ++s.self_loops;
        s.events.push_back(e);
        for (int c = 0; c < s.d_E; ++c) s.edge_features(static_cast<Eigen::Index>(i), c) = rows[i].feat[c];
    }
    s.num_nodes = static_cast<int>(s.original_ids.size());
    s.d_N = 0;
    s.node_features = Mat::Zero(s.num_nodes, 0);
    s.finalize();
    return s;
}

inline SplitIndex chronological_split(const EventStream& stream) {
    std::int64_t n = static_cast<std::int64_t>(stream.events.size());
    require(n >= 10, "split degenerate: need at least 10 events, got " + std::to_string(n));
    // 70/15/15 with rounding toward train
    std::int64_t train = (7 * n + 9) / 10;
    std::int64_t val = (3 * n) / 20;
    SplitIndex s;
    s.train_begin = 0;
    s.train_end = train;
    s.val_begin = train;
    s.val_end = train + val;
    s.test_begin = train + val;
    s.test_end = n;
    return s;
}

// The L most recent events incident to {u, v} strictly before t. Ties on
// timestamp resolve by stream position (later positions are more recent).
inline EgoSubgraph sample_ego(const EventStream& stream, int u, int v, double t, int L) {
    EgoSubgraph ego;
    ego.query = Event{u, v, t};
    ego.L = L;

    const auto& iu = stream.incident(u);
    const auto& iv = (v == u) ? std::vector<std::int64_t>{} : stream.incident(v);
    auto before = [&](const std::vector<std::int64_t>& idx) {
        // first position whose timestamp >= t
        auto it = std::lower_bound(idx.begin(), idx.end(), t, [&](std::int64_t i, double tt) {
            return stream.events[static_cast<std::size_t>(i)].timestamp < tt;
        });
        return static_cast<std::int64_t>(it - idx.begin());
    };
    std::int64_t pu = before(iu);
    std::int64_t pv = before(v == u ? iu : iv);
    if (v == u) pv = 0;

    // merge the two index lists backwards, newest first, dropping duplicates
    std::vector<std::int64_t> picked;
    picked.reserve(static_cast<std::size_t>(L));
    std::int64_t a = pu - 1, b = pv - 1;
    const auto& lv = (v == u) ? iu : iv;
    while (static_cast<int>(picked.size()) < L && (a >= 0 || b >= 0)) {
        std::int64_t ia = a >= 0 ? iu[static_cast<std::size_t>(a)] : -1;
        std::int64_t ib = b >= 0 ? lv[static_cast<std::size_t>(b)] : -1;
        if (ia == ib) { --b; continue; }
        if (ia > ib) { picked.push_back(ia); --a; }
        else { picked.push_back(ib); --b; }
    }
    std::reverse(picked.begin(), picked.end());  // most-recent-last

    ego.n_real = static_cast<int>(picked.size());
    int pad = L - ego.n_real;
    ego.history.assign(static_cast<std::size_t>(L), -1);
    ego.pad_mask.assign(static_cast<std::size_t>(L), false);
    for (int i = 0; i < ego.n_real; ++i) {
        ego.history[static_cast<std::size_t>(pad + i)] = picked[static_cast<std::size_t>(i)];
        ego.pad_mask[static_cast<std::size_t>(pad + i)] = true;
    }

    // within-window pair frequencies
    ego.pair_frequency.assign(static_cast<std::size_t>(L), 0);
    std::unordered_map<std::uint64_t, int> counts;
    counts.reserve(static_cast<std::size_t>(ego.n_real) * 2);
    for (int i = pad; i < L; ++i) {
        const Event& e = stream.events[static_cast<std::size_t>(ego.history[static_cast<std::size_t>(i)])];
        ++counts[pair_key(e.source, e.destination)];
    }
    for (int i = pad; i < L; ++i) {
        const Event& e = stream.events[static_cast<std::size_t>(ego.history[static_cast<std::size_t>(i)])];
        ego.pair_frequency[static_cast<std::size_t>(i)] = counts[pair_key(e.source, e.destination)];
    }

    auto last_before = [&](int node, std::int64_t upper, const std::vector<std::int64_t>& idx) -> double {
        (void)node;
        if (upper <= 0) return -1.0;
        return stream.events[static_cast<std::size_t>(idx[static_cast<std::size_t>(upper - 1)])].timestamp;
    };
    double tu = last_before(u, pu, iu);
    double tv = (v == u) ? tu : last_before(v, pv, lv);
    ego.delta_u = tu < 0.0 ? t : t - tu;  // never active: elapsed time since origin
    ego.delta_v = tv < 0.0 ? t : t - tv;
    return ego;
}

inline EgoSubgraph sample_ego(const EventStream& stream, const Event& query, int L) {
    return sample_ego(stream, query.source, query.destination, query.timestamp, L);
}

// Frequency of each history event's unordered pair inside the window.
// The event counts itself, so real entries are >= 1.
inline std::vector<int> pair_frequencies(const EventStream& stream, const std::vector<std::int64_t>& history) {
    std::unordered_map<std::uint64_t, int> counts;
    for (std::int64_t idx : history) {
        if (idx < 0) continue;
        const Event& e = stream.events[static_cast<std::size_t>(idx)];
        ++counts[pair_key(e.source, e.destination)];
    }
    std::vector<int> out(history.size(), 0);
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (history[i] < 0) continue;
        const Event& e = stream.events[static_cast<std::size_t>(history[i])];
        out[i] = counts[pair_key(e.source, e.destination)];
    }
    return out;
}

// Seen = the unordered pair occurs in any event strictly earlier than the
// query timestamp.
inline bool is_seen(const EventStream& stream, const Event& query) {
    return stream.first_pair_timestamp(query.source, query.destination) < query.timestamp;
}

// Re-index node ids onto an externally supplied dense id space (typically the
// metadata sidecar's map, which may include nodes with no observed events).
inline void reindex_nodes(EventStream& s, const std::vector<long long>& dense_to_original) {
    std::unordered_map<long long, int> to_new;
    for (std::size_t i = 0; i < dense_to_original.size(); ++i)
        to_new[dense_to_original[i]] = static_cast<int>(i);
    for (Event& e : s.events) {
        auto su = to_new.find(s.original_ids[static_cast<std::size_t>(e.source)]);
        auto sv = to_new.find(s.original_ids[static_cast<std::size_t>(e.destination)]);
        require(su != to_new.end() && sv != to_new.end(),
                "event references a node id missing from the metadata id map");
        e.source = su->second;
        e.destination = sv->second;
    }
    s.original_ids = dense_to_original;
    s.num_nodes = static_cast<int>(dense_to_original.size());
    s.node_features = Mat::Zero(s.num_nodes, s.d_N);
    s.finalize();
}

// --- metadata sidecar --------------------------------------------------------

inline void write_metadata(const std::filesystem::path& path, const EventStream& s) {
    io::KvMap kv;
    kv["num_nodes"] = std::to_string(s.num_nodes);
    kv["num_events"] = std::to_string(s.events.size());
    kv["d_N"] = std::to_string(s.d_N);
    kv["d_E"] = std::to_string(s.d_E);
    kv["self_loops"] = std::to_string(s.self_loops);
    kv["out_of_order_rows"] = std::to_string(s.out_of_order_rows);
    for (std::size_t i = 0; i < s.original_ids.size(); ++i)
        kv["id." + std::to_string(i)] = std::to_string(s.original_ids[i]);
    io::write_kv(path, kv);
}

} // namespace tgx
