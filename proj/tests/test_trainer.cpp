#include "tgx/trainer.hpp"
#include "tgx/synthetic.hpp"

#include <catch2/catch.hpp>

#include <filesystem>

using namespace tgx;

namespace {

struct Fixture {
    EventStream stream;
    SplitIndex split;

    Fixture() {
        GenConfig gc;
        gc.num_events = 600;
        gc.num_nodes = 60;
        gc.repeat_ratio = 0.6;
        gc.num_motif_pairs = 5;
        gc.seed = 17;
        auto [s, t] = generate(gc);
        stream = std::move(s);
        split = chronological_split(stream);
    }

    TrainConfig small_config() const {
        TrainConfig tc;
        tc.d = 12;
        tc.d_T = 4;
        tc.d_R = 4;
        tc.L = 10;
        tc.batch_size = 40;
        tc.lr = 1e-3;
        tc.disc_lr = 1e-3;
        tc.max_epochs = 3;
        tc.patience = 10;
        tc.seed = 5;
        tc.dropout = 0.1;
        tc.override_ranges = true;
        return tc;
    }
};

std::uint64_t params_hash(ModelParams& p, ParamGroup g) { return p.content_hash(g); }

} // namespace

TEST_CASE_METHOD(Fixture, "config range validation") {
    TrainConfig tc;
    tc.L = 25;  // not in {20,30,40,50,60}
    REQUIRE_THROWS_WITH(tc.validate(), Catch::Contains("tuning range"));
    tc.L = 30;
    tc.beta = 0.35;
    REQUIRE_THROWS_WITH(tc.validate(), Catch::Contains("beta"));
    tc.beta = 0.0;  // ablation value is allowed
    tc.gamma = 1.0;
    tc.dropout = 0.3;
    REQUIRE_NOTHROW(tc.validate());
    tc.tau = 0.5;
    REQUIRE_THROWS_WITH(tc.validate(), Catch::Contains("tau"));
    tc.override_ranges = true;
    REQUIRE_NOTHROW(tc.validate());
}

TEST_CASE_METHOD(Fixture, "beta = gamma = 0 reduces the total to L_Pre") {
    TrainConfig tc = small_config();
    tc.beta = 0.0;
    tc.gamma = 0.0;
    Trainer tr(stream, split, tc);
    auto examples = tr.make_epoch_examples(0);
    StepReport rep = tr.train_step(std::span<const QueryExample>(examples.data(), 40), 0, 0);
    REQUIRE(rep.total == rep.l_pre);
}

TEST_CASE_METHOD(Fixture, "loss composition identity") {
    TrainConfig tc = small_config();
    tc.beta = 0.4;
    tc.gamma = 0.2;
    Trainer tr(stream, split, tc);
    auto examples = tr.make_epoch_examples(0);
    StepReport rep = tr.train_step(std::span<const QueryExample>(examples.data(), 40), 0, 0);
    REQUIRE(rep.total == Approx(rep.l_pre + 0.4 * rep.l_com + 0.2 * rep.l_dis_enc).margin(1e-12));
}

TEST_CASE_METHOD(Fixture, "zero learning rates leave parameters bitwise unchanged") {
    TrainConfig tc = small_config();
    tc.lr = 0.0;
    tc.disc_lr = 0.0;
    tc.override_ranges = true;
    Trainer tr(stream, split, tc);
    std::uint64_t h_theta = params_hash(tr.params(), ParamGroup::theta);
    std::uint64_t h_phi = params_hash(tr.params(), ParamGroup::phi);
    std::uint64_t h_psi = params_hash(tr.params(), ParamGroup::psi);
    auto examples = tr.make_epoch_examples(0);
    tr.train_step(std::span<const QueryExample>(examples.data(), 40), 0, 0);
    REQUIRE(params_hash(tr.params(), ParamGroup::theta) == h_theta);
    REQUIRE(params_hash(tr.params(), ParamGroup::phi) == h_phi);
    REQUIRE(params_hash(tr.params(), ParamGroup::psi) == h_psi);
}

TEST_CASE_METHOD(Fixture, "parameter partition discipline") {
    TrainConfig tc = small_config();
    Trainer tr(stream, split, tc);
    auto examples = tr.make_epoch_examples(0);
    std::vector<EgoFeatures> feats;
    for (int i = 0; i < 40; ++i) feats.push_back(tr.featurize_query(examples[static_cast<std::size_t>(i)]));
    Rng noise_rng(derive_seed(tc.seed, "mask", 0));
    std::vector<ExampleNoise> noise;
    for (int i = 0; i < 40; ++i) noise.push_back(make_noise(tr.dims(), tc.dropout, noise_rng));
    BatchForward fwd = batch_forward(tr.params(), feats, noise, ForwardMode::train, tc.tau,
                                     tr.schedule().current_r, tc.hard_mask);
    Rng rr(derive_seed(tc.seed, "resample", 0));
    auto partner = resample_partners(fwd.labels, rr);

    SECTION("discriminator step changes only psi") {
        std::uint64_t h_theta = params_hash(tr.params(), ParamGroup::theta);
        std::uint64_t h_phi = params_hash(tr.params(), ParamGroup::phi);
        std::uint64_t h_psi = params_hash(tr.params(), ParamGroup::psi);
        tr.discriminator_step(fwd, partner, nullptr);
        REQUIRE(params_hash(tr.params(), ParamGroup::theta) == h_theta);
        REQUIRE(params_hash(tr.params(), ParamGroup::phi) == h_phi);
        REQUIRE(params_hash(tr.params(), ParamGroup::psi) != h_psi);
    }
    SECTION("model step changes only theta and phi") {
        std::uint64_t h_theta = params_hash(tr.params(), ParamGroup::theta);
        std::uint64_t h_phi = params_hash(tr.params(), ParamGroup::phi);
        std::uint64_t h_psi = params_hash(tr.params(), ParamGroup::psi);
        tr.model_step(feats, noise, fwd, partner, nullptr);
        REQUIRE(params_hash(tr.params(), ParamGroup::theta) != h_theta);
        REQUIRE(params_hash(tr.params(), ParamGroup::phi) != h_phi);
        REQUIRE(params_hash(tr.params(), ParamGroup::psi) == h_psi);
    }
}

TEST_CASE_METHOD(Fixture, "same seed replays the StepReport trajectory bitwise") {
    TrainConfig tc = small_config();
    tc.max_epochs = 3;
    std::vector<StepReport> first, second;
    for (int run = 0; run < 2; ++run) {
        Trainer tr(stream, split, tc);
        auto& sink = run == 0 ? first : second;
        for (int epoch = 0; epoch < 3; ++epoch) {
            update_prior(tr.schedule(), epoch);
            auto examples = tr.make_epoch_examples(epoch);
            int batch_index = 0;
            for (std::size_t start = 0; start + 40 <= examples.size(); start += 40, ++batch_index)
                sink.push_back(tr.train_step(
                    std::span<const QueryExample>(examples.data() + start, 40), epoch, batch_index));
        }
    }
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        REQUIRE(first[i].l_pre == second[i].l_pre);
        REQUIRE(first[i].l_com == second[i].l_com);
        REQUIRE(first[i].l_dis_enc == second[i].l_dis_enc);
        REQUIRE(first[i].l_dis_disc == second[i].l_dis_disc);
    }
}

TEST_CASE_METHOD(Fixture, "early stopping with patience 1 and frozen losses stops after 2 epochs") {
    TrainConfig tc = small_config();
    tc.lr = 0.0;
    tc.disc_lr = 0.0;
    tc.patience = 1;
    tc.max_epochs = 50;
    Trainer tr(stream, split, tc);
    FitResult res = tr.fit();
    REQUIRE(res.epochs_run == 2);
}

TEST_CASE_METHOD(Fixture, "epochs run the prior curriculum") {
    TrainConfig tc = small_config();
    tc.max_epochs = 25;
    tc.lr = 1e-5;
    tc.patience = 30;
    Trainer tr(stream, split, tc);
    FitResult res = tr.fit();
    REQUIRE(res.log.size() == 25);
    for (int e = 0; e < 10; ++e) REQUIRE(res.log[static_cast<std::size_t>(e)].r == Approx(0.9));
    for (int e = 10; e < 20; ++e) REQUIRE(res.log[static_cast<std::size_t>(e)].r == Approx(0.8));
    for (int e = 20; e < 25; ++e) REQUIRE(res.log[static_cast<std::size_t>(e)].r == Approx(0.7));
}

TEST_CASE_METHOD(Fixture, "checkpoint round-trip is bit-exact") {
    TrainConfig tc = small_config();
    Trainer tr(stream, split, tc);
    auto examples = tr.make_epoch_examples(0);
    tr.train_step(std::span<const QueryExample>(examples.data(), 40), 0, 0);

    auto dir = std::filesystem::temp_directory_path() / "tgx_tests";
    std::filesystem::create_directories(dir);
    auto path = dir / "ckpt.bin";
    tr.save_checkpoint(path);
    Trainer loaded = Trainer::load_checkpoint(path, stream, split);

    REQUIRE(params_hash(tr.params(), ParamGroup::theta) == params_hash(loaded.params(), ParamGroup::theta));
    REQUIRE(params_hash(tr.params(), ParamGroup::phi) == params_hash(loaded.params(), ParamGroup::phi));
    REQUIRE(params_hash(tr.params(), ParamGroup::psi) == params_hash(loaded.params(), ParamGroup::psi));

    // identical forward outputs on a fixed batch
    for (int i = 0; i < 10; ++i) {
        EgoFeatures f = tr.featurize_query(examples[static_cast<std::size_t>(i)]);
        REQUIRE(eval_forward(tr.params(), f).y_hat == eval_forward(loaded.params(), f).y_hat);
    }
}

TEST_CASE_METHOD(Fixture, "corrupt checkpoints are rejected") {
    TrainConfig tc = small_config();
    Trainer tr(stream, split, tc);
    auto dir = std::filesystem::temp_directory_path() / "tgx_tests";
    std::filesystem::create_directories(dir);
    auto path = dir / "ckpt2.bin";
    tr.save_checkpoint(path);

    SECTION("truncated file") {
        auto truncated = dir / "ckpt2_trunc.bin";
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream(truncated, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
        REQUIRE_THROWS_WITH(Trainer::load_checkpoint(truncated, stream, split),
                            Catch::Contains("truncated"));
    }
    SECTION("bad version") {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(8);
        std::uint32_t bad = 999;
        f.write(reinterpret_cast<const char*>(&bad), 4);
        f.close();
        REQUIRE_THROWS_WITH(Trainer::load_checkpoint(path, stream, split),
                            Catch::Contains("version mismatch"));
    }
    SECTION("not a checkpoint") {
        auto garbage = dir / "garbage.bin";
        std::ofstream(garbage, std::ios::binary) << "hello world, definitely not a checkpoint";
        REQUIRE_THROWS_WITH(Trainer::load_checkpoint(garbage, stream, split),
                            Catch::Contains("not a checkpoint"));
    }
}

TEST_CASE_METHOD(Fixture, "resume reproduces the uninterrupted run") {
    TrainConfig tc = small_config();
    tc.max_epochs = 6;
    tc.patience = 20;

    Trainer full(stream, split, tc);
    FitResult full_res = full.fit();

    auto dir = std::filesystem::temp_directory_path() / "tgx_tests";
    std::filesystem::create_directories(dir);
    auto path = dir / "resume.bin";
    // run the first half manually so the checkpoint holds live (not
    // best-restored) state, exactly as the CLI's per-epoch snapshots do
    Trainer half(stream, split, tc);
    {
        for (int epoch = 0; epoch < 3; ++epoch) {
            update_prior(half.schedule(), epoch);
            auto examples = half.make_epoch_examples(epoch);
            int batch_index = 0;
            std::size_t stride = static_cast<std::size_t>(2 * tc.batch_size);
            for (std::size_t start = 0; start < examples.size(); start += stride, ++batch_index) {
                std::size_t count = std::min(stride, examples.size() - start);
                if (count < 2) break;
                half.train_step(std::span<const QueryExample>(examples.data() + start, count), epoch,
                                batch_index);
            }
            double val = half.validation_ap();
            if (val > half.best_val_) {
                half.best_val_ = val;
                half.best_epoch_ = epoch;
                half.has_best_ = true;
                TrainerAccess::best_params(half) = half.params();
                half.stall_ = 0;
            } else {
                ++half.stall_;
            }
            ++TrainerAccess::epoch_next(half);
        }
        half.save_checkpoint(path);
    }
    Trainer resumed = Trainer::load_checkpoint(path, stream, split);
    FitResult res2 = resumed.fit();
    REQUIRE(res2.best_val_ap == Approx(full_res.best_val_ap).margin(1e-6));
    REQUIRE(resumed.best_epoch_ == full.best_epoch_);
    REQUIRE(params_hash(resumed.params(), ParamGroup::theta) == params_hash(full.params(), ParamGroup::theta));
}

TEST_CASE_METHOD(Fixture, "fit improves validation AP on planted data") {
    TrainConfig tc = small_config();
    tc.max_epochs = 8;
    Trainer tr(stream, split, tc);
    double before = tr.validation_ap();
    FitResult res = tr.fit();
    REQUIRE(res.best_val_ap > before);
    REQUIRE(res.best_val_ap > 0.6);
}

TEST_CASE("negative sampler avoids both endpoints") {
    GenConfig gc;
    gc.num_events = 200;
    gc.num_nodes = 12;
    gc.repeat_ratio = 0.5;
    gc.num_motif_pairs = 3;
    auto [s, t] = generate(gc);
    SplitIndex sp = chronological_split(s);
    TrainConfig tc;
    tc.d = 8;
    tc.d_T = 4;
    tc.d_R = 4;
    tc.L = 5;
    tc.override_ranges = true;
    Trainer tr(s, sp, tc);
    Rng rng(3);
    for (const Event& e : s.events) {
        int neg = tr.sample_negative(e, rng);
        REQUIRE(neg != e.source);
        REQUIRE(neg != e.destination);
        REQUIRE(neg >= 0);
        REQUIRE(neg < s.num_nodes);
    }
}
