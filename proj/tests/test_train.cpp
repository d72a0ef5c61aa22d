#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "mffnc/error.hpp"
#include "mffnc/features.hpp"
#include "mffnc/model.hpp"
#include "mffnc/pipeline.hpp"
#include "mffnc/synth.hpp"
#include "mffnc/train.hpp"

using namespace mffnc;

namespace {

double ce_oracle(double z0, double z1, int label) {
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    return lse - (label == 1 ? z1 : z0);
}

ModelConfig tiny(std::size_t vocab = 8) {
    ModelConfig c;
    c.vocab_size = vocab;
    c.max_len = 8;
    c.d1 = c.d2 = c.d_k = c.mlp_hidden = 4;
    return c;
}

Example example(std::string id, std::vector<std::size_t> ids, std::array<double, 6> stats, int label) {
    Example e;
    e.user_id = std::move(id);
    const std::size_t len = ids.size();
    ids.resize(8, Vocab::kPad);
    e.input.text = TokenSequence{ids, len};
    e.input.stats = stats;
    e.label = label;
    return e;
}

std::vector<Example> toy_set(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        std::vector<std::size_t> ids = {Vocab::kCls};
        for (int k = 0; k < 3; ++k) ids.push_back(4 + rng.below(4));
        std::array<double, 6> s{};
        for (double& x : s) x = rng.normal(label ? 1.0 : -1.0, 0.5);
        out.push_back(example("u" + std::to_string(i), ids, s, label));
    }
    return out;
}

}  // namespace

TEST_CASE("cross entropy values") {
    SUBCASE("zero logits give ln 2") {
        const int labels[] = {0, 1, 1};
        CHECK(cross_entropy_loss(Tensor::constant(Matrix(3, 2)), labels).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }
    SUBCASE("large margins stay finite") {
        const int right[] = {1};
        const int wrong[] = {0};
        const Tensor z = Tensor::constant(Matrix(1, 2, {0.0, 1000.0}));
        const double a = cross_entropy_loss(z, right).item();
        const double b = cross_entropy_loss(z, wrong).item();
        CHECK(a >= 0.0);
        CHECK(a < 1e-12);
        CHECK(b == doctest::Approx(1000.0).epsilon(1e-12));
    }
    SUBCASE("batch mean matches the oracle") {
        Rng rng(4);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t b = 1 + rng.below(9);
            Matrix z(b, 2);
            std::vector<int> labels(b);
            double want = 0;
            for (std::size_t i = 0; i < b; ++i) {
                z(i, 0) = rng.uniform(-20, 20);
                z(i, 1) = rng.uniform(-20, 20);
                labels[i] = static_cast<int>(rng.below(2));
                want += ce_oracle(z(i, 0), z(i, 1), labels[i]);
            }
            want /= static_cast<double>(b);
            CHECK(std::abs(cross_entropy_loss(Tensor::constant(z), labels).item() - want) <= 1e-12);
            Matrix shifted = z;
            const double c = rng.uniform(-100, 100);
            for (double& v : shifted.data) v += c;
            CHECK(std::abs(cross_entropy_loss(Tensor::constant(shifted), labels).item() - want) <= 1e-9);
        }
    }
    SUBCASE("gradient is (softmax - onehot) / B") {
        Tensor z = Tensor::parameter(Matrix(2, 2, {1.0, -1.0, 0.5, 2.0}));
        const int labels[] = {0, 1};
        cross_entropy_loss(z, labels).backward();
        const double p0 = 1.0 / (1.0 + std::exp(-2.0));
        const double p1 = 1.0 / (1.0 + std::exp(-1.5));
        CHECK(z.grad()(0, 0) == doctest::Approx((p0 - 1.0) / 2));
        CHECK(z.grad()(0, 1) == doctest::Approx((1.0 - p0) / 2));
        CHECK(z.grad()(1, 0) == doctest::Approx((1.0 - p1) / 2));
        CHECK(z.grad()(1, 1) == doctest::Approx((p1 - 1.0) / 2));
    }
    SUBCASE("bad arguments") {
        const int one[] = {0};
        const int bad[] = {2, 0};
        const int two[] = {0, 1};
        CHECK_THROWS_AS(cross_entropy_loss(Tensor::constant(Matrix(2, 3)), two), DimensionError);
        CHECK_THROWS_AS(cross_entropy_loss(Tensor::constant(Matrix(2, 2)), one), UsageError);
        CHECK_THROWS_AS(cross_entropy_loss(Tensor::constant(Matrix(2, 2)), bad), UsageError);
    }
}

TEST_CASE("adam") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    SUBCASE("zero gradient leaves parameters in place") {
        Tensor p = Tensor::parameter(Matrix(2, 2, {1, 2, 3, 4}));
        AdamState st;
        for (int i = 0; i < 3; ++i) {
            sum(scale(p, 0.0)).backward();
            adam_step(std::span<const Tensor>(&p, 1), st, cfg);
            p.zero_grad();
        }
        CHECK(p.value() == Matrix(2, 2, {1, 2, 3, 4}));
    }
    SUBCASE("first step and a two-step trace") {
        Tensor p = Tensor::parameter(Matrix(1, 1, {0.0}));
        AdamState st;
        sum(p).backward();
        adam_step(std::span<const Tensor>(&p, 1), st, cfg);
        CHECK(p.value()(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
        p.zero_grad();
        sum(scale(p, -3.0)).backward();
        adam_step(std::span<const Tensor>(&p, 1), st, cfg);
        // Hand recurrence with g = 1 then g = -3.
        double m = 0.1, v = 0.001, w = -0.1 / (1.0 + 1e-8);
        m = 0.9 * m + 0.1 * -3.0;
        v = 0.999 * v + 0.001 * 9.0;
        w -= 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
        CHECK(p.value()(0, 0) == doctest::Approx(w).epsilon(1e-14));
        CHECK(st.t == 2);
    }
    SUBCASE("zero learning rate is a no-op") {
        cfg.learning_rate = 0.0;
        Tensor p = Tensor::parameter(Matrix(1, 3, {0.5, -0.25, 3.0}));
        AdamState st;
        sum(mul(p, p)).backward();
        adam_step(std::span<const Tensor>(&p, 1), st, cfg);
        CHECK(p.value() == Matrix(1, 3, {0.5, -0.25, 3.0}));
    }
    SUBCASE("missing gradient") {
        Tensor p = Tensor::parameter(Matrix(1, 1));
        AdamState st;
        CHECK_THROWS_AS(adam_step(std::span<const Tensor>(&p, 1), st, cfg), UsageError);
    }
    SUBCASE("config validation") {
        TrainConfig bad;
        bad.learning_rate = 0.0;
        CHECK_THROWS_AS(validate(bad), ConfigError);
        bad = TrainConfig{};
        bad.batch_size = 0;
        CHECK_THROWS_AS(validate(bad), ConfigError);
        bad = TrainConfig{};
        bad.beta2 = 1.0;
        CHECK_THROWS_AS(validate(bad), ConfigError);
        CHECK_NOTHROW(validate(TrainConfig{}));
    }
}

TEST_CASE("one small step lowers the batch loss") {
    TrainConfig cfg;
    cfg.learning_rate = 1e-5;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        FusionModel m = FusionModel::init(tiny(), seed);
        const auto set = toy_set(seed + 100, 6);
        std::vector<ModelInput> inputs;
        std::vector<int> labels;
        for (const auto& e : set) {
            inputs.push_back(e.input);
            labels.push_back(e.label);
        }
        std::vector<Tensor> params;
        for (const auto& p : m.parameters()) params.push_back(p.tensor);
        const Tensor before = cross_entropy_loss(forward(m, inputs), labels);
        const double l0 = before.item();
        before.backward();
        AdamState st;
        adam_step(params, st, cfg);
        NoGradGuard ng;
        CHECK(cross_entropy_loss(forward(m, inputs), labels).item() < l0);
    }
}

TEST_CASE("train") {
    const auto train_set = toy_set(1, 24);
    const auto val_set = toy_set(2, 8);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 5;
    cfg.epochs = 4;
    cfg.seed = 9;

    SUBCASE("zero epochs returns the model untouched") {
        FusionModel m = FusionModel::init(tiny(), 3);
        const std::string before = checkpoint_to_string(m);
        TrainConfig z = cfg;
        z.epochs = 0;
        const TrainResult r = train(std::move(m), train_set, {}, z);
        CHECK(checkpoint_to_string(r.model) == before);
        CHECK(r.history.epochs.empty());
        CHECK(r.history.best_epoch == 0);
    }
    SUBCASE("empty sets") {
        CHECK_THROWS_AS(train(FusionModel::init(tiny(), 3), {}, val_set, cfg), ConfigError);
        CHECK_THROWS_AS(train(FusionModel::init(tiny(), 3), train_set, {}, cfg), ConfigError);
    }
    SUBCASE("deterministic for a fixed seed") {
        const TrainResult a = train(FusionModel::init(tiny(), 3), train_set, val_set, cfg);
        const TrainResult b = train(FusionModel::init(tiny(), 3), train_set, val_set, cfg);
        CHECK(checkpoint_to_string(a.model) == checkpoint_to_string(b.model));
        CHECK(history_to_csv(a.history) == history_to_csv(b.history));
        REQUIRE(a.history.epochs.size() == 4);
        for (const auto& e : a.history.epochs) CHECK(e.seconds == 0.0);
        TrainConfig other = cfg;
        other.seed = 10;
        const TrainResult c = train(FusionModel::init(tiny(), 3), train_set, val_set, other);
        CHECK(checkpoint_to_string(c.model) != checkpoint_to_string(a.model));
    }
    SUBCASE("history csv layout") {
        TrainHistory h;
        h.epochs.push_back({1, 0.5, 0.75, 0.5, 0.0});
        CHECK(history_to_csv(h) == "epoch,train_loss,val_acc,val_f1,seconds\n1,0.500000000,0.750000,0.500000,0.000\n");
    }
    SUBCASE("early stopping returns the best epoch") {
        TrainConfig es = cfg;
        es.epochs = 12;
        es.early_stop_patience = 2;
        const TrainResult r = train(FusionModel::init(tiny(), 3), train_set, val_set, es);
        REQUIRE(r.history.best_epoch >= 1);
        double best = -1;
        for (const auto& e : r.history.epochs) best = std::max(best, e.val_accuracy);
        CHECK(r.history.epochs[r.history.best_epoch - 1].val_accuracy == best);
        CHECK(evaluate(r.model, val_set).accuracy == best);
        CHECK(r.history.epochs.size() <= 12);
    }
}

TEST_CASE("evaluate and predictions") {
    CHECK(predicted_class(std::array<double, 2>{0.0, 0.0}) == 0);
    CHECK(predicted_class(std::array<double, 2>{0.0, 1e-12}) == 1);
    CHECK(prob_depressed(std::array<double, 2>{0.0, 0.0}) == 0.5);
    CHECK(prob_depressed(std::array<double, 2>{0.0, 800.0}) == 1.0);
    CHECK(prob_depressed(std::array<double, 2>{800.0, 0.0}) == doctest::Approx(0.0));

    // Head that always prefers class 1.
    FusionModel m = FusionModel::init(tiny(), 5);
    m.parameter("mlp.w2").mutable_value() = Matrix(4, 2);
    m.parameter("mlp.b2").mutable_value() = Matrix(1, 2, {0.0, 1.0});
    const auto set = toy_set(3, 10);
    const MetricsReport r = evaluate(m, set);
    CHECK(r.confusion.tp == 5);
    CHECK(r.confusion.fp == 5);
    CHECK(r.recall == 1.0);
    CHECK(r.accuracy == 0.5);
    CHECK_THROWS_AS(evaluate(m, std::span<const Example>()), UsageError);

    // Predictions do not touch gradients and match a one-at-a-time forward.
    const FusionModel g = FusionModel::init(tiny(), 6);
    const Matrix z = predict_logits(g, set);
    for (std::size_t i = 0; i < set.size(); ++i) {
        NoGradGuard ng;
        const Matrix one = forward(g, std::span<const ModelInput>(&set[i].input, 1)).value();
        CHECK(z(i, 0) == one(0, 0));
        CHECK(z(i, 1) == one(0, 1));
    }
    for (const auto& p : g.parameters()) CHECK_FALSE(p.tensor.has_grad());
}

TEST_CASE("experiment on a small synthetic corpus") {
    SynthDatasetSpec spec;
    spec.n_per_class = 20;
    spec.seed = 4;
    const auto users = generate_dataset(spec);
    RunConfig rc;
    rc.model.max_len = 64;
    rc.model.d1 = rc.model.d2 = rc.model.d_k = rc.model.mlp_hidden = 8;
    rc.train.epochs = 3;
    rc.seed = 11;
    const LexiconScorer scorer;
    const ExperimentResult a = run_experiment(users, rc, scorer);
    const ExperimentResult b = run_experiment(users, rc, scorer);
    CHECK(a.n_train == 32);
    CHECK(a.n_validation == 8);
    CHECK(checkpoint_to_string(a.trained.model) == checkpoint_to_string(b.trained.model));
    CHECK(a.validation.accuracy == a.trained.history.epochs.back().val_accuracy);
    CHECK(a.trained.model.vocab.size() == a.trained.model.config().vocab_size);
    CHECK(vocab_coverage(a.trained.model.vocab, users) > 0.9);

    ModelConfig pre = rc.model;
    pre.encoder = EncoderKind::precomputed;
    RunConfig rp = rc;
    rp.model = pre;
    CHECK_THROWS_AS(run_experiment(users, rp, scorer), ConfigError);
}
