#pragma once

#include "tgx/metrics.hpp"
#include "tgx/trainer.hpp"

#include <chrono>

namespace tgx {

namespace ckpt {

constexpr char kMagic[8] = {'T', 'G', 'X', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

inline void write_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_i64(std::ostream& o, std::int64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_f64(std::ostream& o, double v) { o.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_str(std::ostream& o, const std::string& s) {
    write_u32(o, static_cast<std::uint32_t>(s.size()));
    o.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void write_mat(std::ostream& o, const Mat& m) {
    write_u32(o, static_cast<std::uint32_t>(m.rows()));
    write_u32(o, static_cast<std::uint32_t>(m.cols()));
    o.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
}

inline std::uint32_t read_u32(std::istream& i) {
    std::uint32_t v;
    i.read(reinterpret_cast<char*>(&v), 4);
    require(i.good(), "checkpoint truncated");
    return v;
}
inline std::uint64_t read_u64(std::istream& i) {
    std::uint64_t v;
    i.read(reinterpret_cast<char*>(&v), 8);
    require(i.good(), "checkpoint truncated");
    return v;
}
inline std::int64_t read_i64(std::istream& i) {
    std::int64_t v;
    i.read(reinterpret_cast<char*>(&v), 8);
    require(i.good(), "checkpoint truncated");
    return v;
}
inline double read_f64(std::istream& i) {
    double v;
    i.read(reinterpret_cast<char*>(&v), 8);
    require(i.good(), "checkpoint truncated");
    return v;
}
inline std::string read_str(std::istream& i) {
    std::uint32_t n = read_u32(i);
    require(n < (1u << 20), "checkpoint corrupt: oversized string");
    std::string s(n, '\0');
    i.read(s.data(), n);
    require(i.good(), "checkpoint truncated");
    return s;
}
inline Mat read_mat(std::istream& i) {
    std::uint32_t r = read_u32(i), c = read_u32(i);
    Mat m(r, c);
    i.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
    require(i.good(), "checkpoint truncated");
    return m;
}

inline void write_params(std::ostream& o, ModelParams& p) {
    std::uint32_t count = 0;
    p.visit([&](ParamGroup, const std::string&, Mat&) { ++count; });
    write_u32(o, count);
    p.visit([&](ParamGroup, const std::string& name, Mat& m) {
        write_str(o, name);
        write_mat(o, m);
    });
}

inline void read_params(std::istream& i, ModelParams& p) {
    std::uint32_t count = read_u32(i);
    std::uint32_t expect = 0;
    p.visit([&](ParamGroup, const std::string&, Mat&) { ++expect; });
    require(count == expect, "checkpoint corrupt: parameter count mismatch");
    p.visit([&](ParamGroup, const std::string& name, Mat& m) {
        std::string got = read_str(i);
        require(got == name, "checkpoint corrupt: expected parameter " + name + ", found " + got);
        Mat v = read_mat(i);
        require(v.rows() == m.rows() && v.cols() == m.cols(),
                "checkpoint corrupt: shape mismatch for " + name);
        m = std::move(v);
    });
}

inline void write_adam(std::ostream& o, const Adam& a) {
    write_f64(o, a.lr_);
    write_i64(o, a.t_);
    write_u32(o, static_cast<std::uint32_t>(a.m_.size()));
    for (const Mat& m : a.m_) write_mat(o, m);
    for (const Mat& m : a.v_) write_mat(o, m);
}

inline void read_adam(std::istream& i, Adam& a) {
    a.lr_ = read_f64(i);
    a.t_ = read_i64(i);
    std::uint32_t n = read_u32(i);
    a.m_.clear();
    a.v_.clear();
    for (std::uint32_t k = 0; k < n; ++k) a.m_.push_back(read_mat(i));
    for (std::uint32_t k = 0; k < n; ++k) a.v_.push_back(read_mat(i));
}

} // namespace ckpt

struct TrainerAccess {
    static Adam& adam_model(Trainer& t) { return t.adam_model_; }
    static Adam& adam_disc(Trainer& t) { return t.adam_disc_; }
    static ModelParams& best_params(Trainer& t) { return t.best_params_; }
    static int& epoch_next(Trainer& t) { return t.epoch_next_; }
    static PriorSchedule& schedule(Trainer& t) { return t.schedule_; }
    static const TrainConfig& cfg(const Trainer& t) { return t.cfg_; }
};

inline double Trainer::validation_ap() {
    Rng neg_rng(derive_seed(cfg_.seed, "val_negative"));
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::int64_t i = split_.val_begin; i < split_.val_end; ++i) {
        const Event& e = stream_->events[static_cast<std::size_t>(i)];
        EgoFeatures fp = featurize_query({e.source, e.destination, e.timestamp, 1.0, i});
        scores.push_back(eval_forward(params_, fp).y_hat);
        labels.push_back(1);
        int neg = sample_negative(e, neg_rng);
        EgoFeatures fn = featurize_query({e.source, neg, e.timestamp, 0.0, -1});
        scores.push_back(eval_forward(params_, fn).y_hat);
        labels.push_back(0);
    }
    return average_precision(scores, labels);
}

inline FitResult Trainer::fit(const std::function<void(const EpochRow&)>& on_epoch) {
    auto t0 = std::chrono::steady_clock::now();
    FitResult res;
    for (; epoch_next_ < cfg_.max_epochs; ++epoch_next_) {
        int epoch = epoch_next_;
        update_prior(schedule_, epoch);
        std::vector<QueryExample> examples = make_epoch_examples(epoch);

        double lp = 0.0, lc = 0.0, ld = 0.0;
        long long n = 0;
        int batch_index = 0;
        std::size_t stride = static_cast<std::size_t>(2 * cfg_.batch_size);
        for (std::size_t start = 0; start < examples.size(); start += stride, ++batch_index) {
            std::size_t count = std::min(stride, examples.size() - start);
            if (count < 2) break;
            StepReport rep = train_step(std::span<const QueryExample>(examples.data() + start, count),
                                        epoch, batch_index);
            lp += rep.l_pre * rep.n_examples;
            lc += rep.l_com * rep.n_examples;
            ld += rep.l_dis_enc * rep.n_examples;
            n += rep.n_examples;
        }

        EpochRow row;
        row.epoch = epoch;
        row.l_pre = lp / static_cast<double>(n);
        row.l_com = lc / static_cast<double>(n);
        row.l_dis = ld / static_cast<double>(n);
        row.r = schedule_.current_r;
        row.val_ap = validation_ap();
        res.log.push_back(row);
        if (on_epoch) on_epoch(row);

        if (row.val_ap > best_val_) {
            best_val_ = row.val_ap;
            best_epoch_ = epoch;
            best_params_ = params_;
            has_best_ = true;
            stall_ = 0;
        } else {
            ++stall_;
            if (stall_ >= cfg_.patience) {
                ++epoch_next_;
                break;
            }
        }
    }
    if (has_best_) params_ = best_params_;
    res.best_val_ap = best_val_;
    res.best_epoch = best_epoch_;
    res.epochs_run = static_cast<int>(res.log.size());
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary);
        require(o.good(), "cannot write " + tmp.string());
        o.write(ckpt::kMagic, 8);
        ckpt::write_u32(o, ckpt::kVersion);
        // dims header (checked against datasets at load/eval time)
        for (int v : {dims_.L, dims_.d, dims_.d_T, dims_.d_R, dims_.d_N, dims_.d_E, dims_.n_layers,
                      dims_.h_tok, dims_.h_ch, dims_.h_scorer, dims_.h_assign, dims_.h_disc})
            ckpt::write_u32(o, static_cast<std::uint32_t>(v));
        // config needed for exact resume
        ckpt::write_u64(o, cfg_.seed);
        ckpt::write_u32(o, static_cast<std::uint32_t>(cfg_.batch_size));
        ckpt::write_f64(o, cfg_.lr);
        ckpt::write_f64(o, cfg_.disc_lr);
        ckpt::write_u32(o, static_cast<std::uint32_t>(cfg_.max_epochs));
        ckpt::write_u32(o, static_cast<std::uint32_t>(cfg_.patience));
        ckpt::write_f64(o, cfg_.beta);
        ckpt::write_f64(o, cfg_.gamma);
        ckpt::write_f64(o, cfg_.dropout);
        ckpt::write_f64(o, cfg_.tau);
        ckpt::write_f64(o, cfg_.r_init);
        ckpt::write_f64(o, cfg_.r_target);
        ckpt::write_u32(o, cfg_.hard_mask ? 1u : 0u);
        ckpt::write_u32(o, cfg_.override_ranges ? 1u : 0u);
        // schedule + progress
        ckpt::write_u32(o, static_cast<std::uint32_t>(epoch_next_));
        ckpt::write_u32(o, static_cast<std::uint32_t>(stall_));
        ckpt::write_f64(o, best_val_);
        ckpt::write_i64(o, best_epoch_);
        ckpt::write_u32(o, has_best_ ? 1u : 0u);
        ckpt::write_f64(o, schedule_.current_r);
        ckpt::write_params(o, const_cast<ModelParams&>(params_));
        if (has_best_) ckpt::write_params(o, const_cast<ModelParams&>(best_params_));
        ckpt::write_adam(o, adam_model_);
        ckpt::write_adam(o, adam_disc_);
        require(o.good(), "write failure on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Trainer Trainer::load_checkpoint(const std::filesystem::path& path, const EventStream& stream,
                                        const SplitIndex& split) {
    std::ifstream i(path, std::ios::binary);
    require(i.good(), "cannot open " + path.string());
    char magic[8];
    i.read(magic, 8);
    require(i.good() && std::memcmp(magic, ckpt::kMagic, 8) == 0, "not a checkpoint file: " + path.string());
    std::uint32_t version = ckpt::read_u32(i);
    require(version == ckpt::kVersion,
            "checkpoint version mismatch: expected " + std::to_string(ckpt::kVersion) + ", found " +
                std::to_string(version));
    int dims_raw[12];
    for (int& v : dims_raw) v = static_cast<int>(ckpt::read_u32(i));

    TrainConfig cfg;
    cfg.seed = ckpt::read_u64(i);
    cfg.batch_size = static_cast<int>(ckpt::read_u32(i));
    cfg.lr = ckpt::read_f64(i);
    cfg.disc_lr = ckpt::read_f64(i);
    cfg.max_epochs = static_cast<int>(ckpt::read_u32(i));
    cfg.patience = static_cast<int>(ckpt::read_u32(i));
    cfg.beta = ckpt::read_f64(i);
    cfg.gamma = ckpt::read_f64(i);
    cfg.dropout = ckpt::read_f64(i);
    cfg.tau = ckpt::read_f64(i);
    cfg.r_init = ckpt::read_f64(i);
    cfg.r_target = ckpt::read_f64(i);
    cfg.hard_mask = ckpt::read_u32(i) != 0;
    cfg.override_ranges = ckpt::read_u32(i) != 0;
    cfg.L = dims_raw[0];
    cfg.d = dims_raw[1];
    cfg.d_T = dims_raw[2];
    cfg.d_R = dims_raw[3];
    cfg.n_layers = dims_raw[6];

    require(dims_raw[4] == stream.d_N && dims_raw[5] == stream.d_E,
            "checkpoint/dataset dimension mismatch: checkpoint has d_N=" + std::to_string(dims_raw[4]) +
                ", d_E=" + std::to_string(dims_raw[5]) + "; dataset has d_N=" + std::to_string(stream.d_N) +
                ", d_E=" + std::to_string(stream.d_E));

    Trainer tr(stream, split, cfg);
    tr.epoch_next_ = static_cast<int>(ckpt::read_u32(i));
    tr.stall_ = static_cast<int>(ckpt::read_u32(i));
    tr.best_val_ = ckpt::read_f64(i);
    tr.best_epoch_ = static_cast<int>(ckpt::read_i64(i));
    tr.has_best_ = ckpt::read_u32(i) != 0;
    tr.schedule_.current_r = ckpt::read_f64(i);
    ckpt::read_params(i, tr.params_);
    if (tr.has_best_) {
        tr.best_params_ = tr.params_;  // allocate matching shapes
        ckpt::read_params(i, tr.best_params_);
    }
    ckpt::read_adam(i, tr.adam_model_);
    ckpt::read_adam(i, tr.adam_disc_);
    return tr;
}

} // namespace tgx
