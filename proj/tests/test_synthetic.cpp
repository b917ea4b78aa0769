#include "tgx/synthetic.hpp"

#include <catch2/catch.hpp>

#include <filesystem>
#include <set>
#include <sstream>
#include <unordered_set>

using namespace tgx;

namespace {

double realized_repeat_ratio(const EventStream& s) {
    std::unordered_set<std::uint64_t> seen;
    long long repeats = 0;
    for (const Event& e : s.events) {
        std::uint64_t k = pair_key(e.source, e.destination);
        if (seen.count(k)) ++repeats;
        seen.insert(k);
    }
    return static_cast<double>(repeats) / static_cast<double>(s.events.size());
}

} // namespace

TEST_CASE("same seed gives byte-identical stream and truth") {
    GenConfig gc;
    gc.num_events = 1200;
    gc.num_nodes = 80;
    gc.seed = 42;
    auto [s1, t1] = generate(gc);
    auto [s2, t2] = generate(gc);
    REQUIRE(s1.events.size() == s2.events.size());
    for (std::size_t i = 0; i < s1.events.size(); ++i) {
        REQUIRE(s1.events[i].source == s2.events[i].source);
        REQUIRE(s1.events[i].destination == s2.events[i].destination);
        REQUIRE(s1.events[i].timestamp == s2.events[i].timestamp);
    }
    REQUIRE(s1.edge_features == s2.edge_features);
    REQUIRE(s1.node_features == s2.node_features);
    REQUIRE(t1.causes.size() == t2.causes.size());

    auto p1 = std::filesystem::temp_directory_path() / "tgx_tests" / "gen1.csv";
    auto p2 = std::filesystem::temp_directory_path() / "tgx_tests" / "gen2.csv";
    std::filesystem::create_directories(p1.parent_path());
    write_events_csv(p1, s1);
    write_events_csv(p2, s2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream b1, b2;
    b1 << f1.rdbuf();
    b2 << f2.rdbuf();
    REQUIRE(b1.str() == b2.str());
    REQUIRE(!b1.str().empty());
}

TEST_CASE("repeat_ratio = 1.0 reuses the motif pairs only") {
    GenConfig gc;
    gc.num_events = 2000;
    gc.num_nodes = 50;
    gc.repeat_ratio = 1.0;
    gc.num_motif_pairs = 5;
    gc.noise_rate = 0.0;
    auto [s, truth] = generate(gc);
    std::set<std::uint64_t> pairs;
    for (const Event& e : s.events) pairs.insert(pair_key(e.source, e.destination));
    REQUIRE(pairs.size() == 5);
    REQUIRE(realized_repeat_ratio(s) == Approx(1.0).margin(5.0 / 2000 + 1e-9));
}

TEST_CASE("repeat_ratio = 0.0 keeps all pairs distinct") {
    GenConfig gc;
    gc.num_events = 1500;
    gc.num_nodes = 120;
    gc.repeat_ratio = 0.0;
    gc.num_motif_pairs = 0;
    auto [s, truth] = generate(gc);
    std::set<std::uint64_t> pairs;
    for (const Event& e : s.events) pairs.insert(pair_key(e.source, e.destination));
    REQUIRE(pairs.size() == s.events.size());
}

TEST_CASE("UCI-like repeat target is realized within the band") {
    GenConfig gc;
    gc.num_events = 10000;
    gc.num_nodes = 250;
    gc.repeat_ratio = 0.66;
    auto [s, truth] = generate(gc);
    double r = realized_repeat_ratio(s);
    REQUIRE(r >= 0.63);
    REQUIRE(r <= 0.69);
}

TEST_CASE("infeasible configs name the violated constraint") {
    GenConfig gc;
    gc.repeat_ratio = 0.5;
    gc.num_motif_pairs = 0;
    REQUIRE_THROWS_WITH(generate(gc), Catch::Contains("num_motif_pairs"));
    GenConfig g2;
    g2.repeat_ratio = 1.5;
    REQUIRE_THROWS_WITH(generate(g2), Catch::Contains("repeat_ratio"));
}

TEST_CASE("planted frequencies: stability >= 2 when both occurrences present, transition = 1") {
    GenConfig gc;
    gc.num_events = 3000;
    gc.num_nodes = 150;
    gc.seed = 9;
    auto [s, truth] = generate(gc);
    int checked_stab = 0, checked_trans = 0;
    for (const auto& [q, causes] : truth.causes) {
        EgoSubgraph ego = sample_ego(s, s.events[static_cast<std::size_t>(q)].source,
                                     s.events[static_cast<std::size_t>(q)].destination,
                                     s.events[static_cast<std::size_t>(q)].timestamp, 20);
        // count in-window same-pair occurrences per cause tag
        for (const auto& c : causes) {
            for (std::size_t r = 0; r < ego.history.size(); ++r) {
                if (ego.history[r] != c.event_index) continue;
                if (c.tag == CauseTag::transition) {
                    REQUIRE(ego.pair_frequency[r] == 1);
                    ++checked_trans;
                } else {
                    // at least two occurrences of the pair in this window?
                    const Event& ce = s.events[static_cast<std::size_t>(c.event_index)];
                    int occurrences = 0;
                    for (std::int64_t h : ego.history) {
                        if (h < 0) continue;
                        const Event& he = s.events[static_cast<std::size_t>(h)];
                        if (pair_key(he.source, he.destination) == pair_key(ce.source, ce.destination))
                            ++occurrences;
                    }
                    if (occurrences >= 2) REQUIRE(ego.pair_frequency[r] >= 2);
                    ++checked_stab;
                }
            }
        }
    }
    REQUIRE(checked_stab > 100);
    REQUIRE(checked_trans > 20);
}

TEST_CASE("every cause strictly precedes its query") {
    GenConfig gc;
    gc.num_events = 1500;
    gc.num_nodes = 100;
    auto [s, truth] = generate(gc);
    for (const auto& [q, causes] : truth.causes)
        for (const auto& c : causes) REQUIRE(c.event_index < q);
}

TEST_CASE("truth_mask marks in-window causes and reports coverage") {
    GenConfig gc;
    gc.num_events = 2000;
    gc.num_nodes = 120;
    gc.seed = 21;
    auto [s, truth] = generate(gc);

    SECTION("transition query with both wedges in window") {
        // find a transition query
        for (const auto& [q, causes] : truth.causes) {
            if (causes.empty() || causes[0].tag != CauseTag::transition) continue;
            EgoSubgraph ego = sample_ego(s, s.events[static_cast<std::size_t>(q)].source,
                                         s.events[static_cast<std::size_t>(q)].destination,
                                         s.events[static_cast<std::size_t>(q)].timestamp, 20);
            TruthMask tm = truth_mask(truth, ego, q);
            if (tm.n_in_window == 2) {
                int marked = 0;
                for (bool b : tm.mask) marked += b ? 1 : 0;
                REQUIRE(marked == 2);
                return;
            }
        }
        FAIL("no fully covered transition query found");
    }

    SECTION("window too small reports coverage loss") {
        for (const auto& [q, causes] : truth.causes) {
            if (causes.size() < 3) continue;
            EgoSubgraph ego = sample_ego(s, s.events[static_cast<std::size_t>(q)].source,
                                         s.events[static_cast<std::size_t>(q)].destination,
                                         s.events[static_cast<std::size_t>(q)].timestamp, 2);
            TruthMask tm = truth_mask(truth, ego, q);
            REQUIRE(tm.n_in_window < tm.n_causes);
            return;
        }
        FAIL("no query with enough causes found");
    }

    SECTION("unknown query index raises") {
        EgoSubgraph ego = sample_ego(s, 0, 1, 1.0, 4);
        std::int64_t missing = -1;
        for (std::int64_t q = 0; q < 50; ++q)
            if (!truth.has(q)) { missing = q; break; }
        REQUIRE(missing >= 0);
        REQUIRE_THROWS_WITH(truth_mask(truth, ego, missing), Catch::Contains("not in truth table"));
    }
}

TEST_CASE("truth_mask cardinalities cross-check over a query sample") {
    GenConfig gc;
    gc.num_events = 3000;
    gc.num_nodes = 150;
    gc.seed = 33;
    auto [s, truth] = generate(gc);
    int checked = 0;
    for (const auto& [q, causes] : truth.causes) {
        if (checked >= 100) break;
        ++checked;
        const Event& e = s.events[static_cast<std::size_t>(q)];
        EgoSubgraph ego = sample_ego(s, e.source, e.destination, e.timestamp, 30);
        TruthMask tm = truth_mask(truth, ego, q);
        REQUIRE(tm.n_causes == static_cast<int>(causes.size()));
        long long out_of_window = 0;
        for (const auto& c : causes) {
            bool found = false;
            for (std::int64_t h : ego.history)
                if (h == c.event_index) found = true;
            if (!found) ++out_of_window;
        }
        REQUIRE(tm.n_in_window == tm.n_causes - out_of_window);
        int marked = 0;
        for (bool b : tm.mask) marked += b ? 1 : 0;
        REQUIRE(marked == tm.n_in_window);
    }
    REQUIRE(checked == 100);
}

TEST_CASE("truth sidecar round-trips") {
    GenConfig gc;
    gc.num_events = 600;
    gc.num_nodes = 60;
    auto [s, truth] = generate(gc);
    auto path = std::filesystem::temp_directory_path() / "tgx_tests" / "truth.txt";
    std::filesystem::create_directories(path.parent_path());
    write_truth(path, truth);
    PlantedTruth loaded = load_truth(path);
    REQUIRE(loaded.causes.size() == truth.causes.size());
    for (const auto& [q, causes] : truth.causes) {
        REQUIRE(loaded.causes.count(q) == 1);
        const auto& lc = loaded.causes.at(q);
        REQUIRE(lc.size() == causes.size());
        for (std::size_t i = 0; i < causes.size(); ++i) {
            REQUIRE(lc[i].event_index == causes[i].event_index);
            REQUIRE(lc[i].tag == causes[i].tag);
        }
    }
}

TEST_CASE("frequency separation: stability causes outnumber transition causes in-window") {
    GenConfig gc;
    gc.num_events = 4000;
    gc.num_nodes = 180;
    gc.seed = 13;
    auto [s, truth] = generate(gc);
    double stab_sum = 0, stab_n = 0, trans_sum = 0, trans_n = 0;
    for (const auto& [q, causes] : truth.causes) {
        const Event& e = s.events[static_cast<std::size_t>(q)];
        EgoSubgraph ego = sample_ego(s, e.source, e.destination, e.timestamp, 20);
        for (const auto& c : causes) {
            for (std::size_t r = 0; r < ego.history.size(); ++r) {
                if (ego.history[r] != c.event_index) continue;
                if (c.tag == CauseTag::stability) {
                    stab_sum += ego.pair_frequency[r];
                    ++stab_n;
                } else {
                    trans_sum += ego.pair_frequency[r];
                    ++trans_n;
                }
            }
        }
    }
    REQUIRE(stab_n > 0);
    REQUIRE(trans_n > 0);
    REQUIRE(stab_sum / stab_n >= trans_sum / trans_n);
}
