// Command-line front end: dataset generation, training, evaluation,
// explanation export, and plot emission.

#include "tgx/evaluator.hpp"
#include "tgx/svg.hpp"
#include "tgx/synthetic.hpp"
#include "tgx/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

int default_workers() {
    std::string env = env_or("TGX_WORKERS", "");
    if (!env.empty()) return std::max(1, std::atoi(env.c_str()));
    return std::max(1u, std::thread::hardware_concurrency());
}

// Every run drops its resolved configuration next to its outputs.
void write_resolved_config(const fs::path& out_dir, const tgx::io::KvMap& kv) {
    tgx::io::write_kv(out_dir / "config.resolved.txt", kv);
}

// Flags override config-file values; the config file supplies defaults.
template <typename T>
void maybe_from_config(const tgx::io::KvMap& kv, const std::string& key, T& value, bool flag_given) {
    if (flag_given) return;
    auto it = kv.find(key);
    if (it == kv.end()) return;
    if constexpr (std::is_same_v<T, std::string>) {
        value = it->second;
    } else if constexpr (std::is_integral_v<T>) {
        value = static_cast<T>(std::stoll(it->second));
    } else {
        value = static_cast<T>(std::stod(it->second));
    }
}

struct Dataset {
    tgx::EventStream stream;
    std::optional<tgx::PlantedTruth> truth;
};

Dataset load_dataset(const fs::path& dir) {
    Dataset d;
    tgx::require(fs::exists(dir / "events.csv"), "dataset missing events.csv in " + dir.string());
    d.stream = tgx::ingest_csv(dir / "events.csv");
    if (fs::exists(dir / "metadata.txt")) {
        auto kv = tgx::io::read_kv(dir / "metadata.txt");
        if (kv.count("d_E"))
            tgx::require(std::stoi(kv["d_E"]) == d.stream.d_E,
                         "metadata d_E (" + kv["d_E"] + ") disagrees with events.csv (d_E=" +
                             std::to_string(d.stream.d_E) + ")");
        // the metadata id map is authoritative; it may list idle nodes
        if (kv.count("num_nodes")) {
            int n = std::stoi(kv["num_nodes"]);
            std::vector<long long> ids(static_cast<std::size_t>(n));
            bool complete = true;
            for (int i = 0; i < n; ++i) {
                auto it = kv.find("id." + std::to_string(i));
                if (it == kv.end()) {
                    complete = false;
                    break;
                }
                ids[static_cast<std::size_t>(i)] = std::stoll(it->second);
            }
            if (complete) tgx::reindex_nodes(d.stream, ids);
        }
    }
    if (fs::exists(dir / "node_features.csv")) tgx::load_node_features_csv(dir / "node_features.csv", d.stream);
    if (fs::exists(dir / "truth.txt")) d.truth = tgx::load_truth(dir / "truth.txt");
    return d;
}

std::vector<std::pair<double, double>> read_xy_csv(const fs::path& path, int xcol, int ycol, bool header) {
    std::ifstream in(path);
    tgx::require(in.good(), "cannot open " + path.string());
    std::vector<std::pair<double, double>> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && header) {
            first = false;
            continue;
        }
        first = false;
        std::string t = tgx::io::trim(line);
        if (t.empty()) continue;
        auto cells = tgx::io::split_csv_line(t);
        double x, y;
        if (static_cast<int>(cells.size()) <= std::max(xcol, ycol)) continue;
        if (!tgx::io::parse_double(cells[static_cast<std::size_t>(xcol)], x) ||
            !tgx::io::parse_double(cells[static_cast<std::size_t>(ycol)], y))
            continue;
        out.emplace_back(x, y);
    }
    tgx::require(!out.empty(), "no plottable rows in " + path.string());
    return out;
}

void write_curve_csv(const fs::path& path, const std::string& y_name, const tgx::SparsityCurve& c) {
    std::string buf = "s," + y_name + "\n";
    for (std::size_t i = 0; i < c.s.size(); ++i)
        buf += tgx::io::format_double(c.s[i]) + "," + tgx::io::format_double(c.value[i]) + "\n";
    tgx::io::write_text_atomic(path, buf);
}

json curve_to_json(const tgx::SparsityCurve& c) {
    json arr = json::array();
    for (std::size_t i = 0; i < c.s.size(); ++i) arr.push_back({{"s", c.s[i]}, {"value", c.value[i]}});
    return arr;
}

// --- generate ------------------------------------------------------------------

int cmd_generate(const tgx::GenConfig& cfg, const fs::path& out_dir, bool force) {
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
        throw std::runtime_error("output directory " + out_dir.string() +
                                 " exists and is not empty (use --force to overwrite)");
    fs::create_directories(out_dir);
    auto [stream, truth] = tgx::generate(cfg);
    tgx::write_events_csv(out_dir / "events.csv", stream);
    tgx::write_node_features_csv(out_dir / "node_features.csv", stream);
    tgx::write_metadata(out_dir / "metadata.txt", stream);
    tgx::write_truth(out_dir / "truth.txt", truth);

    tgx::io::KvMap kv;
    kv["command"] = "generate";
    kv["nodes"] = std::to_string(cfg.num_nodes);
    kv["events"] = std::to_string(cfg.num_events);
    kv["repeat_ratio"] = tgx::io::format_double(cfg.repeat_ratio);
    kv["motif_pairs"] = std::to_string(cfg.num_motif_pairs);
    kv["motif_lifetime"] = std::to_string(cfg.motif_lifetime);
    kv["burst_rate"] = tgx::io::format_double(cfg.transition_burst_rate);
    kv["noise_rate"] = tgx::io::format_double(cfg.noise_rate);
    kv["stability_cause_depth"] = std::to_string(cfg.stability_cause_depth);
    kv["seed"] = std::to_string(cfg.seed);
    kv["d_N"] = std::to_string(cfg.d_N);
    kv["d_E"] = std::to_string(cfg.d_E);
    write_resolved_config(out_dir, kv);
    std::cout << "wrote " << stream.events.size() << " events, " << truth.causes.size()
              << " labeled queries to " << out_dir.string() << "\n";
    return kExitOk;
}

// --- train ---------------------------------------------------------------------

tgx::io::KvMap train_config_kv(const tgx::TrainConfig& tc, const fs::path& data_dir) {
    tgx::io::KvMap kv;
    kv["command"] = "train";
    kv["data"] = data_dir.string();
    kv["batch_size"] = std::to_string(tc.batch_size);
    kv["lr"] = tgx::io::format_double(tc.lr);
    kv["disc_lr"] = tgx::io::format_double(tc.disc_lr);
    kv["epochs"] = std::to_string(tc.max_epochs);
    kv["patience"] = std::to_string(tc.patience);
    kv["beta"] = tgx::io::format_double(tc.beta);
    kv["gamma"] = tgx::io::format_double(tc.gamma);
    kv["L"] = std::to_string(tc.L);
    kv["layers"] = std::to_string(tc.n_layers);
    kv["dropout"] = tgx::io::format_double(tc.dropout);
    kv["tau"] = tgx::io::format_double(tc.tau);
    kv["r_init"] = tgx::io::format_double(tc.r_init);
    kv["r_target"] = tgx::io::format_double(tc.r_target);
    kv["d"] = std::to_string(tc.d);
    kv["d_T"] = std::to_string(tc.d_T);
    kv["d_R"] = std::to_string(tc.d_R);
    kv["seed"] = std::to_string(tc.seed);
    kv["hard_mask"] = tc.hard_mask ? "1" : "0";
    kv["override_ranges"] = tc.override_ranges ? "1" : "0";
    return kv;
}

int cmd_train(const tgx::TrainConfig& tc, const fs::path& data_dir, const fs::path& out_dir,
              const std::string& resume) {
    Dataset data = load_dataset(data_dir);
    tgx::SplitIndex split = tgx::chronological_split(data.stream);
    fs::create_directories(out_dir);

    std::unique_ptr<tgx::Trainer> trainer;
    if (!resume.empty())
        trainer = std::make_unique<tgx::Trainer>(tgx::Trainer::load_checkpoint(resume, data.stream, split));
    else
        trainer = std::make_unique<tgx::Trainer>(data.stream, split, tc);

    std::string log = "epoch,l_pre,l_com,l_dis,val_ap,r\n";
    fs::path log_path = out_dir / "train_log.csv";
    fs::path ckpt_path = out_dir / "checkpoint.bin";
    auto res = trainer->fit([&](const tgx::EpochRow& row) {
        log += std::to_string(row.epoch) + "," + tgx::io::format_double(row.l_pre) + "," +
               tgx::io::format_double(row.l_com) + "," + tgx::io::format_double(row.l_dis) + "," +
               tgx::io::format_double(row.val_ap) + "," + tgx::io::format_double(row.r) + "\n";
        tgx::io::write_text_atomic(log_path, log);
        trainer->save_checkpoint(out_dir / "checkpoint_live.bin");
        std::cout << "epoch " << row.epoch << " l_pre " << row.l_pre << " val_ap " << row.val_ap
                  << " r " << row.r << "\n";
    });
    trainer->save_checkpoint(ckpt_path);  // best-validation state (fit restored it)
    write_resolved_config(out_dir, train_config_kv(trainer->config(), data_dir));
    std::cout << "best val AP " << res.best_val_ap << " at epoch " << res.best_epoch << " ("
              << res.epochs_run << " epochs, " << res.wall_seconds << "s)\n";
    return kExitOk;
}

// --- eval ----------------------------------------------------------------------

struct EvalOutputs {
    json report;
};

json eval_one(tgx::Trainer& trainer, Dataset& data, const tgx::SplitIndex& split,
              const tgx::EvalOptions& opts, bool with_truth, bool seen_unseen, int export_embeddings,
              const fs::path& out_dir, const std::string& suffix) {
    tgx::Evaluator ev(trainer.params(), data.stream, split, opts);
    json rep;
    auto t0 = std::chrono::steady_clock::now();

    rep["ap"] = ev.ap(split.test_begin, split.test_end, "test_negative");
    rep["val_ap"] = ev.ap(split.val_begin, split.val_end, "val_negative");

    tgx::MrrResult m = ev.mrr();
    rep["mrr"] = m.mrr;
    if (seen_unseen) {
        rep["mrr_seen"] = m.mrr_seen;
        rep["mrr_unseen"] = m.mrr_unseen;
        rep["n_seen"] = m.n_seen;
        rep["n_unseen"] = m.n_unseen;
    }
    if (m.full_complement) rep["mrr_full_complement"] = true;

    tgx::FidelityReport fid = ev.fidelity();
    rep["acc_auc"] = fid.acc_auc;
    rep["acc_auc_raw"] = fid.acc_auc_raw;
    rep["acc_curve"] = curve_to_json(fid.acc_curve);
    auto opt_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    rep["aufsc_plus"] = {{"correct", opt_json(fid.aufsc_plus_correct)},
                         {"incorrect", opt_json(fid.aufsc_plus_incorrect)}};
    rep["aufsc_minus"] = {{"correct", opt_json(fid.aufsc_minus_correct)},
                          {"incorrect", opt_json(fid.aufsc_minus_incorrect)}};
    rep["n_correct"] = fid.n_correct;
    rep["n_incorrect"] = fid.n_incorrect;

    write_curve_csv(out_dir / ("acc_curve" + suffix + ".csv"), "acc", fid.acc_curve);
    write_curve_csv(out_dir / ("fid_minus_correct" + suffix + ".csv"), "fid_minus", fid.fid_minus_correct);
    write_curve_csv(out_dir / ("fid_plus_correct" + suffix + ".csv"), "fid_plus", fid.fid_plus_correct);

    if (with_truth) {
        tgx::require(data.truth.has_value(), "--with-truth requires truth.txt in the dataset directory");
        auto ta = ev.explanation_truth_auc(*data.truth);
        rep["explanation_truth_auc"] = ta.auc;
        rep["explanation_truth_queries"] = ta.n_queries;
        rep["explanation_truth_coverage"] = ta.coverage;
        auto rnd = ev.explanation_truth_auc(*data.truth, true);
        rep["random_mask_truth_auc"] = rnd.auc;
    }

    if (export_embeddings > 0) {
        std::vector<std::int64_t> queries;
        for (std::int64_t i = split.test_begin;
             i < split.test_end && static_cast<int>(queries.size()) < export_embeddings; ++i)
            queries.push_back(i);
        auto rows = ev.export_embeddings(queries);
        std::string buf = "query_index,kind,pc1,pc2";
        int d = static_cast<int>(rows.empty() ? 0 : rows[0].h_S.size());
        for (int c = 0; c < d; ++c) buf += ",v" + std::to_string(c);
        buf += "\n";
        auto emit = [&](const tgx::EmbeddingRow& r, const char* kind, double p1, double p2, const tgx::Vec& v) {
            buf += std::to_string(r.query_index);
            buf += ",";
            buf += kind;
            buf += "," + tgx::io::format_double(p1) + "," + tgx::io::format_double(p2);
            for (int c = 0; c < d; ++c) buf += "," + tgx::io::format_double(v(c));
            buf += "\n";
        };
        for (const auto& r : rows) {
            emit(r, "h_S", r.pc1_S, r.pc2_S, r.h_S);
            emit(r, "h_T", r.pc1_T, r.pc2_T, r.h_T);
            emit(r, "h_E", r.pc1_E, r.pc2_E, r.h_E);
        }
        tgx::io::write_text_atomic(out_dir / ("embeddings" + suffix + ".csv"), buf);
    }

    rep["runtime"] = {{"wall_seconds",
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                      {"n_test_events", split.test_end - split.test_begin}};
    return rep;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const fs::path& data_dir,
             const fs::path& out_dir, tgx::EvalOptions opts, bool with_truth, bool seen_unseen,
             int export_embeddings) {
    Dataset data = load_dataset(data_dir);
    tgx::SplitIndex split = tgx::chronological_split(data.stream);
    fs::create_directories(out_dir);

    std::vector<json> reports;
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        tgx::Trainer trainer = tgx::Trainer::load_checkpoint(checkpoints[k], data.stream, split);
        std::string suffix = checkpoints.size() > 1 ? "_" + std::to_string(k) : "";
        json rep = eval_one(trainer, data, split, opts, with_truth, seen_unseen, export_embeddings,
                            out_dir, suffix);
        rep["checkpoint"] = checkpoints[k];
        reports.push_back(rep);
        tgx::io::write_text_atomic(out_dir / ("report" + suffix + ".json"), reports.back().dump(2) + "\n");
    }

    if (reports.size() > 1) {
        // mean +- std per scalar metric over seeds
        json agg;
        for (const auto& key : {"ap", "val_ap", "mrr", "mrr_seen", "mrr_unseen", "acc_auc",
                                "explanation_truth_auc", "random_mask_truth_auc"}) {
            std::vector<double> vals;
            for (const auto& r : reports)
                if (r.contains(key) && r[key].is_number()) vals.push_back(r[key].get<double>());
            if (vals.empty()) continue;
            double mean = 0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var /= static_cast<double>(vals.size());
            agg[key] = {{"mean", mean}, {"std", std::sqrt(var)}, {"n", vals.size()}};
        }
        tgx::io::write_text_atomic(out_dir / "report_aggregate.json", agg.dump(2) + "\n");
        std::cout << "aggregate over " << reports.size() << " checkpoints written\n";
    }
    std::cout << "report written to " << (out_dir / "report.json").string() << "\n";
    return kExitOk;
}

// --- explain -------------------------------------------------------------------

int cmd_explain(const std::string& checkpoint, const fs::path& data_dir, std::int64_t q_begin,
                std::int64_t q_end, double sparsity, const fs::path& out_file) {
    Dataset data = load_dataset(data_dir);
    tgx::SplitIndex split = tgx::chronological_split(data.stream);
    tgx::Trainer trainer = tgx::Trainer::load_checkpoint(checkpoint, data.stream, split);
    std::int64_t n = static_cast<std::int64_t>(data.stream.events.size());
    if (q_begin < 0 || q_end > n || q_begin >= q_end)
        throw std::runtime_error("query range [" + std::to_string(q_begin) + ", " + std::to_string(q_end) +
                                 ") out of range for " + std::to_string(n) + " events");

    std::string buf = "query_index,rank,history_event_index,p_e,p_f,weight_S,weight_T,time_gap\n";
    int L = trainer.dims().L;
    for (std::int64_t q = q_begin; q < q_end; ++q) {
        const tgx::Event& e = data.stream.events[static_cast<std::size_t>(q)];
        tgx::EgoSubgraph ego = tgx::sample_ego(data.stream, e.source, e.destination, e.timestamp, L);
        tgx::EgoFeatures f = tgx::featurize(data.stream, ego);
        f.label = 1.0;
        tgx::EvalOutput out = tgx::eval_forward(trainer.params(), f);
        std::vector<bool> pad(ego.pad_mask.begin(), ego.pad_mask.end());
        std::vector<bool> keep = tgx::extract_explanation(out.p, pad, sparsity);
        // rank kept rows by p descending, recency breaking ties
        std::vector<int> rows;
        for (int i = 0; i < L; ++i)
            if (keep[static_cast<std::size_t>(i)]) rows.push_back(i);
        std::sort(rows.begin(), rows.end(), [&](int a, int b) {
            if (out.p(a) != out.p(b)) return out.p(a) > out.p(b);
            return a > b;
        });
        auto [ws, wt] = tgx::split_masks_values(out.p, out.p_f);
        for (std::size_t rank = 0; rank < rows.size(); ++rank) {
            int i = rows[rank];
            buf += std::to_string(q) + "," + std::to_string(rank + 1) + "," +
                   std::to_string(ego.history[static_cast<std::size_t>(i)]) + "," +
                   tgx::io::format_double(out.p(i)) + "," + tgx::io::format_double(out.p_f(i)) + "," +
                   tgx::io::format_double(ws(i)) + "," + tgx::io::format_double(wt(i)) + "," +
                   tgx::io::format_double(e.timestamp -
                                          data.stream.events[static_cast<std::size_t>(
                                              ego.history[static_cast<std::size_t>(i)])].timestamp) +
                   "\n";
        }
    }
    fs::create_directories(out_file.parent_path().empty() ? fs::path(".") : out_file.parent_path());
    tgx::io::write_text_atomic(out_file, buf);
    std::cout << "explanations written to " << out_file.string() << "\n";
    return kExitOk;
}

// --- plot ----------------------------------------------------------------------

int cmd_plot(const std::string& kind, const fs::path& input, const fs::path& out_file) {
    if (kind == "sparsity-curve") {
        auto xy = read_xy_csv(input, 0, 1, true);
        tgx::svg::Series s;
        s.label = "ACC(s)";
        s.color = "#1f77b4";
        for (auto [x, y] : xy) {
            s.x.push_back(x);
            s.y.push_back(y);
        }
        tgx::svg::write_chart(out_file, "Prediction agreement vs sparsity", "sparsity", "agreement", {s});
    } else if (kind == "loss-curves") {
        // train_log.csv: epoch,l_pre,l_com,l_dis,val_ap,r
        std::vector<tgx::svg::Series> series(3);
        series[0] = {"L_Pre", "#1f77b4", {}, {}, false};
        series[1] = {"L_Com", "#ff7f0e", {}, {}, false};
        series[2] = {"L_Dis", "#2ca02c", {}, {}, false};
        for (int c = 1; c <= 3; ++c) {
            auto xy = read_xy_csv(input, 0, c, true);
            for (auto [x, y] : xy) {
                series[static_cast<std::size_t>(c - 1)].x.push_back(x);
                series[static_cast<std::size_t>(c - 1)].y.push_back(y);
            }
        }
        tgx::svg::write_chart(out_file, "Training losses", "epoch", "loss", series);
    } else if (kind == "embedding-projection") {
        // embeddings.csv: query_index,kind,pc1,pc2,...
        std::ifstream in(input);
        tgx::require(in.good(), "cannot open " + input.string());
        std::map<std::string, tgx::svg::Series> by_kind;
        by_kind["h_S"] = {"h_S", "#d62728", {}, {}, true};
        by_kind["h_T"] = {"h_T", "#1f77b4", {}, {}, true};
        by_kind["h_E"] = {"h_E", "#7f7f7f", {}, {}, true};
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (first) {
                first = false;
                continue;
            }
            auto cells = tgx::io::split_csv_line(tgx::io::trim(line));
            if (cells.size() < 4) continue;
            auto it = by_kind.find(cells[1]);
            double x, y;
            if (it == by_kind.end() || !tgx::io::parse_double(cells[2], x) ||
                !tgx::io::parse_double(cells[3], y))
                continue;
            it->second.x.push_back(x);
            it->second.y.push_back(y);
        }
        std::vector<tgx::svg::Series> series;
        for (auto& [k, s] : by_kind)
            if (!s.x.empty()) series.push_back(s);
        tgx::require(!series.empty(), "no embedding rows in " + input.string());
        tgx::svg::write_chart(out_file, "Latent projections", "pc1", "pc2", series);
    } else {
        throw CLI::ValidationError("--kind", "unknown plot kind: " + kind);
    }
    std::cout << "plot written to " << out_file.string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-explainable temporal graph link prediction with stability/transition disentanglement"};
    app.require_subcommand(1);

    std::string config_file;
    std::string out_env = env_or("TGX_OUTPUT_DIR", "");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic temporal event stream with planted causes");
    tgx::GenConfig gc;
    std::string gen_out = out_env.empty() ? "dataset" : out_env;
    bool force = false;
    gen->add_option("--config", config_file, "key=value config file (flags take precedence)");
    auto* g_nodes = gen->add_option("--nodes", gc.num_nodes, "number of nodes")->check(CLI::Range(4, 10000000));
    auto* g_events = gen->add_option("--events", gc.num_events, "number of events")->check(CLI::PositiveNumber);
    auto* g_rr = gen->add_option("--repeat-ratio", gc.repeat_ratio, "target repeat ratio")
                     ->check(CLI::Range(0.0, 1.0));
    auto* g_motif = gen->add_option("--motif-pairs", gc.num_motif_pairs, "active stable pair pool size");
    auto* g_life = gen->add_option("--motif-lifetime", gc.motif_lifetime, "firings before a pair retires");
    auto* g_burst = gen->add_option("--burst-rate", gc.transition_burst_rate, "transition bundle rate")
                        ->check(CLI::NonNegativeNumber);
    auto* g_noise = gen->add_option("--noise-rate", gc.noise_rate, "filler event fraction")
                        ->check(CLI::Range(0.0, 1.0));
    auto* g_seed = gen->add_option("--seed", gc.seed, "random seed");
    auto* g_dn = gen->add_option("--dn", gc.d_N, "node feature dimension");
    auto* g_de = gen->add_option("--de", gc.d_E, "edge feature dimension");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_flag("--force", force, "overwrite a non-empty output directory");

    // train
    auto* train = app.add_subcommand("train", "Train the self-explaining link predictor");
    tgx::TrainConfig tc;
    std::string train_data, train_out = out_env.empty() ? "run" : out_env, resume;
    std::string train_config_file;
    train->add_option("--config", train_config_file, "key=value config file (flags take precedence)");
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "output directory");
    auto* t_epochs = train->add_option("--epochs", tc.max_epochs, "max epochs")->check(CLI::PositiveNumber);
    auto* t_batch = train->add_option("--batch", tc.batch_size, "batch size (positives per step)");
    auto* t_lr = train->add_option("--lr", tc.lr, "model learning rate");
    auto* t_dlr = train->add_option("--disc-lr", tc.disc_lr, "discriminator learning rate");
    auto* t_pat = train->add_option("--patience", tc.patience, "early stopping patience");
    auto* t_beta = train->add_option("--beta", tc.beta, "compression weight");
    auto* t_gamma = train->add_option("--gamma", tc.gamma, "disentanglement weight");
    auto* t_L = train->add_option("--L", tc.L, "history window length");
    auto* t_layers = train->add_option("--layers", tc.n_layers, "mixer layers");
    auto* t_drop = train->add_option("--dropout", tc.dropout, "dropout rate");
    auto* t_tau = train->add_option("--tau", tc.tau, "concrete temperature");
    auto* t_rt = train->add_option("--r-target", tc.r_target, "prior rate target");
    auto* t_d = train->add_option("--d", tc.d, "embedding dimension");
    auto* t_dt = train->add_option("--dt", tc.d_T, "time encoding dimension");
    auto* t_dr = train->add_option("--dr", tc.d_R, "relative time dimension");
    auto* t_seed = train->add_option("--seed", tc.seed, "random seed");
    train->add_flag("--hard-mask", tc.hard_mask, "straight-through hard masks during training");
    train->add_flag("--override-ranges", tc.override_ranges, "allow hyperparameters outside the tuning ranges");
    train->add_option("--resume", resume, "resume from a checkpoint file");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint: AP, MRR, ACC-AUC, AUFSC");
    std::vector<std::string> checkpoints;
    std::string eval_data, eval_out = out_env.empty() ? "eval" : out_env;
    tgx::EvalOptions eo;
    eo.workers = default_workers();
    bool with_truth = false, seen_unseen = false;
    int export_embeddings = 0;
    eval->add_option("--checkpoint", checkpoints, "checkpoint file(s); several aggregate mean +- std")
        ->required()
        ->expected(-1);
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--workers", eo.workers, "evaluation worker threads");
    eval->add_option("--max-queries", eo.max_queries, "cap instances for the sparsity protocols");
    eval->add_option("--num-negatives", eo.num_negatives, "ranking negatives per event");
    eval->add_option("--seed", eo.seed, "evaluation sampling seed");
    eval->add_flag("--with-truth", with_truth, "score explanations against the planted truth");
    eval->add_flag("--seen-unseen", seen_unseen, "report the seen/unseen MRR breakdown");
    eval->add_option("--export-embeddings", export_embeddings, "export latent vectors for N test queries");

    // explain
    auto* explain = app.add_subcommand("explain", "Export ranked explanations for a query range");
    std::string ex_ckpt, ex_data, ex_out = "explanations.csv", ex_range = "0:10";
    double ex_sparsity = 0.3;
    explain->add_option("--checkpoint", ex_ckpt, "checkpoint file")->required();
    explain->add_option("--data", ex_data, "dataset directory")->required();
    explain->add_option("--queries", ex_range, "event index range a:b over the stream");
    explain->add_option("--sparsity", ex_sparsity, "fraction of window rows to keep")
        ->check(CLI::Range(0.0, 1.0));
    explain->add_option("--out", ex_out, "output CSV path");

    // plot
    auto* plot = app.add_subcommand("plot", "Render CSV outputs as SVG charts");
    std::string plot_kind, plot_in, plot_out = "plot.svg";
    plot->add_option("--kind", plot_kind, "sparsity-curve | embedding-projection | loss-curves")
        ->required()
        ->check(CLI::IsMember({"sparsity-curve", "embedding-projection", "loss-curves"}));
    plot->add_option("--in", plot_in, "input CSV")->required();
    plot->add_option("--out", plot_out, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        // CLI11 maps --help to 0; everything else is a usage error
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            if (!config_file.empty()) {
                auto kv = tgx::io::read_kv(config_file);
                maybe_from_config(kv, "nodes", gc.num_nodes, g_nodes->count() > 0);
                maybe_from_config(kv, "events", gc.num_events, g_events->count() > 0);
                maybe_from_config(kv, "repeat_ratio", gc.repeat_ratio, g_rr->count() > 0);
                maybe_from_config(kv, "motif_pairs", gc.num_motif_pairs, g_motif->count() > 0);
                maybe_from_config(kv, "motif_lifetime", gc.motif_lifetime, g_life->count() > 0);
                maybe_from_config(kv, "burst_rate", gc.transition_burst_rate, g_burst->count() > 0);
                maybe_from_config(kv, "noise_rate", gc.noise_rate, g_noise->count() > 0);
                maybe_from_config(kv, "seed", gc.seed, g_seed->count() > 0);
                maybe_from_config(kv, "d_N", gc.d_N, g_dn->count() > 0);
                maybe_from_config(kv, "d_E", gc.d_E, g_de->count() > 0);
            }
            return cmd_generate(gc, gen_out, force);
        }
        if (train->parsed()) {
            if (!train_config_file.empty()) {
                auto kv = tgx::io::read_kv(train_config_file);
                maybe_from_config(kv, "epochs", tc.max_epochs, t_epochs->count() > 0);
                maybe_from_config(kv, "batch_size", tc.batch_size, t_batch->count() > 0);
                maybe_from_config(kv, "lr", tc.lr, t_lr->count() > 0);
                maybe_from_config(kv, "disc_lr", tc.disc_lr, t_dlr->count() > 0);
                maybe_from_config(kv, "patience", tc.patience, t_pat->count() > 0);
                maybe_from_config(kv, "beta", tc.beta, t_beta->count() > 0);
                maybe_from_config(kv, "gamma", tc.gamma, t_gamma->count() > 0);
                maybe_from_config(kv, "L", tc.L, t_L->count() > 0);
                maybe_from_config(kv, "layers", tc.n_layers, t_layers->count() > 0);
                maybe_from_config(kv, "dropout", tc.dropout, t_drop->count() > 0);
                maybe_from_config(kv, "tau", tc.tau, t_tau->count() > 0);
                maybe_from_config(kv, "r_target", tc.r_target, t_rt->count() > 0);
                maybe_from_config(kv, "d", tc.d, t_d->count() > 0);
                maybe_from_config(kv, "d_T", tc.d_T, t_dt->count() > 0);
                maybe_from_config(kv, "d_R", tc.d_R, t_dr->count() > 0);
                maybe_from_config(kv, "seed", tc.seed, t_seed->count() > 0);
            }
            return cmd_train(tc, train_data, train_out, resume);
        }
        if (eval->parsed())
            return cmd_eval(checkpoints, eval_data, eval_out, eo, with_truth, seen_unseen,
                            export_embeddings);
        if (explain->parsed()) {
            std::size_t colon = ex_range.find(':');
            if (colon == std::string::npos)
                throw CLI::ValidationError("--queries", "expected a:b");
            std::int64_t a = std::stoll(ex_range.substr(0, colon));
            std::int64_t b = std::stoll(ex_range.substr(colon + 1));
            return cmd_explain(ex_ckpt, ex_data, a, b, ex_sparsity, ex_out);
        }
        if (plot->parsed()) return cmd_plot(plot_kind, plot_in, plot_out);
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
