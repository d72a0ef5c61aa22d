#include <doctest.h>

#include <fstream>
#include <set>
#include <stdexcept>

#include "fixtures.hpp"
#include "mffnc/error.hpp"
#include "mffnc/features.hpp"
#include "mffnc/synth.hpp"
#include "oracles.hpp"

using namespace mffnc;

namespace {

struct ConstScorer final : SentimentScorer {
    double value;
    explicit ConstScorer(double v) : value(v) {}
    double score(std::string_view) const override { return value; }
    std::string name() const override { return "const"; }
};

struct ThrowOnSecond final : SentimentScorer {
    double score(std::string_view text) const override {
        if (text == "boom") throw std::runtime_error("service unavailable");
        return 0.0;
    }
    std::string name() const override { return "flaky"; }
};

std::vector<Tweet> at_times(std::initializer_list<const char*> times) {
    std::vector<Tweet> out;
    for (const char* t : times) out.push_back(fx::tweet(t));
    return out;
}

}  // namespace

TEST_CASE("proportion_original") {
    std::vector<Tweet> t(10, fx::tweet("2020-01-01 12:00:00", "x", false));
    for (int i = 0; i < 4; ++i) t[i].is_original = true;
    CHECK(proportion_original(t) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(proportion_original({}) == 0.0);
    for (auto& x : t) x.is_original = true;
    CHECK(proportion_original(t) == 1.0);
}

TEST_CASE("proportion_late_night uses [00:00, 06:00)") {
    CHECK(proportion_late_night(at_times({"2020-01-01 02:30:00", "2020-01-01 05:59:59", "2020-01-01 06:00:00",
                                          "2020-01-01 23:59:00"})) == 0.5);
    CHECK(proportion_late_night(at_times({"2020-01-01 12:00:00", "2020-01-02 12:00:00"})) == 0.0);
    CHECK(proportion_late_night(at_times({"2020-01-01 00:00:00", "2020-01-05 00:00:00"})) == 1.0);
    CHECK(proportion_late_night({}) == 0.0);
}

TEST_CASE("posts_per_week") {
    std::vector<Tweet> nine;
    for (int i = 0; i < 8; ++i) nine.push_back(fx::tweet("2020-01-01 00:00:00"));
    nine.push_back(fx::tweet("2020-01-04 00:00:00"));
    CHECK(posts_per_week(nine) == doctest::Approx(21.0).epsilon(1e-14));
    CHECK(posts_per_week(at_times({"2020-01-01 08:00:00"})) == 7.0);
    CHECK(posts_per_week({}) == 0.0);
    std::vector<Tweet> fourteen;
    for (int d = 1; d <= 14; ++d) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "2020-01-%02d 10:00:00", d == 14 ? 15 : d);
        fourteen.push_back(fx::tweet(buf));
    }
    CHECK(posts_per_week(fourteen) == doctest::Approx(7.0).epsilon(1e-14));
    // Span under a day is floored to one day.
    CHECK(posts_per_week(at_times({"2020-01-01 08:00:00", "2020-01-01 09:00:00"})) == 14.0);
}

TEST_CASE("posting_time_sd") {
    CHECK(posting_time_sd(at_times({"2020-01-01 01:00:00", "2020-01-02 13:00:00"})) ==
          doctest::Approx(360.0).epsilon(1e-15));
    CHECK(posting_time_sd(at_times({"2020-01-01 07:15:00", "2020-02-01 07:15:00", "2020-03-01 07:15:00"})) == 0.0);
    // Reference value from a straight-loop population SD of {0, 360, 720, 1080}.
    CHECK(posting_time_sd(at_times({"2020-01-01 00:00:00", "2020-01-01 06:00:00", "2020-01-01 12:00:00",
                                    "2020-01-01 18:00:00"})) == doctest::Approx(402.49223594996215).epsilon(1e-14));
    CHECK(posting_time_sd(at_times({"2020-01-01 00:00:00"})) == 0.0);
    CHECK(posting_time_sd({}) == 0.0);
    // Extreme spread stays below 720.
    CHECK(posting_time_sd(at_times({"2020-01-01 00:00:00", "2020-01-01 23:59:59"})) < 720.0);
}

TEST_CASE("proportion_negative with constant scorers") {
    std::vector<Tweet> t(5, fx::tweet("2020-01-01 12:00:00"));
    CHECK(proportion_negative(t, ConstScorer(1.0)) == 1.0);
    CHECK(proportion_negative(t, ConstScorer(0.0)) == 0.0);
    // Strictly greater than the threshold.
    CHECK(proportion_negative(t, ConstScorer(0.5), 0.5) == 0.0);
    CHECK(proportion_negative({}, ConstScorer(1.0)) == 0.0);
}

TEST_CASE("proportion_negative with the default lexicon") {
    std::vector<Tweet> t = {fx::tweet("2020-01-01 12:00:00", "孤独 绝望"), fx::tweet("2020-01-02 12:00:00", "today is fine")};
    CHECK(proportion_negative(t, LexiconScorer()) == 0.5);
}

TEST_CASE("proportion_negative errors") {
    std::vector<Tweet> t = {fx::tweet("2020-01-01 12:00:00", "ok"), fx::tweet("2020-01-02 12:00:00", "boom")};
    try {
        (void)proportion_negative(t, ThrowOnSecond());
        FAIL("expected FeatureError");
    } catch (const FeatureError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
    CHECK_THROWS_AS((void)proportion_negative(t, ConstScorer(1.5)), FeatureError);
    CHECK_THROWS_AS((void)proportion_negative(t, ConstScorer(0.1), 1.5), ConfigError);
}

TEST_CASE("image_frequency") {
    std::vector<Tweet> t(8, fx::tweet("2020-01-01 12:00:00"));
    t[0].has_images = t[3].has_images = true;
    CHECK(image_frequency(t) == 0.25);
    for (auto& x : t) x.has_images = false;
    CHECK(image_frequency(t) == 0.0);
    for (auto& x : t) x.has_images = true;
    CHECK(image_frequency(t) == 1.0);
    CHECK(image_frequency({}) == 0.0);
}

TEST_CASE("lexicon_score") {
    const Lexicon& lex = Lexicon::builtin();
    CHECK(lexicon_score("", lex) == 0.0);
    CHECK(lexicon_score("   ", lex) == 0.0);
    CHECK(lexicon_score("sad lonely", lex) == 1.0);
    CHECK(lexicon_score("I am so sad", lex) == 0.25);
    CHECK(lexicon_score("SAD", lex) == 1.0);
    // Two-character term covers both of its character tokens.
    CHECK(lexicon_score("我很孤独", lex) == 0.5);
    CHECK(lexicon_score("孤", lex) == 0.0);
    CHECK(lexicon_score("好累", lex) == 0.5);
}

TEST_CASE("shipped lexicon file equals the built-in list") {
    const Lexicon file = Lexicon::from_file(MFFNC_DATA_DIR "/negative_lexicon.txt");
    const Lexicon& builtin = Lexicon::builtin();
    CHECK(file.size() == builtin.size());
    for (const auto& w : {"孤独", "绝望", "心累", "死", "lonely", "worthless"}) CHECK(file.contains_term(w));
    CHECK_FALSE(file.contains_term("coffee"));
    CHECK_THROWS_AS(Lexicon::from_file("/nonexistent/lexicon.txt"), IoError);
}

TEST_CASE("synthetic pools: negative words all in the lexicon, neutral words never score") {
    const Lexicon& lex = Lexicon::builtin();
    for (const auto& w : default_negative_words()) CHECK(lex.contains_term(w));
    for (const auto& w : default_neutral_words()) CHECK(lexicon_score(w, lex) == 0.0);
}

TEST_CASE("extract_features") {
    SUBCASE("empty timeline is all zero") {
        const StatFeatureVector v = extract_features(fx::user("a", Label::normal), LexiconScorer());
        CHECK(v == StatFeatureVector{});
    }
    SUBCASE("saturated user") {
        std::vector<Tweet> t = {fx::tweet("2020-01-01 01:00:00", "孤独", true, true),
                                fx::tweet("2020-01-03 03:00:00", "绝望", true, true)};
        const StatFeatureVector v = extract_features(fx::user("a", Label::depressed, t), LexiconScorer());
        CHECK(v.p_original == 1.0);
        CHECK(v.p_late_night == 1.0);
        CHECK(v.p_negative == 1.0);
        CHECK(v.image_freq == 1.0);
        CHECK(v.posts_per_week == doctest::Approx(2.0 / ((2.0 + 2.0 / 24.0) / 7.0)).epsilon(1e-14));
        CHECK(v.posting_time_sd == doctest::Approx(60.0).epsilon(1e-14));
    }
    SUBCASE("seed 7 synthetic user against the oracle") {
        Rng rng(7);
        const UserRecord u = generate_user(Label::depressed, default_synth_params(), rng);
        const std::set<std::string> neg(default_negative_words().begin(), default_negative_words().end());
        const auto want = oracle::features(u, neg, 0.5);
        const auto got = extract_features(u, LexiconScorer()).to_array();
        for (int i = 0; i < 6; ++i) CHECK(std::abs(got[i] - want.v[i]) <= 1e-12);
    }
}

TEST_CASE("feature ranges, permutation invariance and duplication") {
    SynthDatasetSpec spec;
    spec.n_per_class = 30;
    spec.seed = 3;
    const LexiconScorer scorer;
    for (const UserRecord& u : generate_dataset(spec)) {
        const auto v = extract_features(u, scorer);
        for (double f : {v.p_original, v.p_late_night, v.p_negative, v.image_freq}) {
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
        }
        CHECK(v.posting_time_sd >= 0.0);
        CHECK(v.posting_time_sd < 720.0);

        UserRecord shuffled = u;
        Rng rng(11);
        rng.shuffle(std::span<Tweet>(shuffled.tweets));
        const auto w = extract_features(shuffled, scorer).to_array();
        const auto a = v.to_array();
        for (int i = 0; i < 6; ++i) CHECK(w[i] == doctest::Approx(a[i]).epsilon(1e-12));

        UserRecord doubled = u;
        doubled.tweets.insert(doubled.tweets.end(), u.tweets.begin(), u.tweets.end());
        const auto d = extract_features(doubled, scorer);
        CHECK(d.p_original == doctest::Approx(v.p_original).epsilon(1e-15));
        CHECK(d.p_late_night == doctest::Approx(v.p_late_night).epsilon(1e-15));
        CHECK(d.p_negative == doctest::Approx(v.p_negative).epsilon(1e-15));
        CHECK(d.image_freq == doctest::Approx(v.image_freq).epsilon(1e-15));
        CHECK(d.posts_per_week == doctest::Approx(2.0 * v.posts_per_week).epsilon(1e-13));
    }
}

TEST_CASE("serial and parallel extraction agree exactly") {
    SynthDatasetSpec spec;
    spec.n_per_class = 40;
    spec.seed = 5;
    const auto users = generate_dataset(spec);
    const LexiconScorer scorer;
    CHECK(serial::extract_all(users, scorer) == parallel::extract_all(users, scorer));
}

TEST_CASE("parallel extraction propagates scorer failures") {
    std::vector<UserRecord> users(20, fx::user("a", Label::normal, {fx::tweet("2020-01-01 00:00:00", "fine")}));
    users[13].tweets[0].text = "boom";
    CHECK_THROWS_AS(parallel::extract_all(users, ThrowOnSecond()), FeatureError);
}

TEST_CASE("normalizer") {
    std::vector<StatFeatureVector> xs;
    Rng rng(1);
    for (int i = 0; i < 50; ++i)
        xs.push_back({rng.uniform(), rng.uniform(), 30 * rng.uniform(), 400 * rng.uniform(), 0.25, rng.uniform()});
    const FeatureNormalizer n = fit_normalizer(xs);
    CHECK(n.std[4] == FeatureNormalizer::kStdFloor);
    std::array<double, 6> mean{}, sq{};
    for (const auto& x : xs) {
        const auto z = n.apply(x);
        CHECK(z[4] == 0.0);
        for (int j = 0; j < 6; ++j) {
            mean[j] += z[j] / 50.0;
            sq[j] += z[j] * z[j] / 50.0;
        }
        const auto back = n.invert(z).to_array();
        const auto orig = x.to_array();
        for (int j = 0; j < 6; ++j) CHECK(std::abs(back[j] - orig[j]) <= 1e-9);
    }
    for (int j : {0, 1, 2, 3, 5}) {
        CHECK(std::abs(mean[j]) <= 1e-9);
        CHECK(std::abs(std::sqrt(sq[j] - mean[j] * mean[j]) - 1.0) <= 1e-6);
    }
    CHECK_THROWS_AS(fit_normalizer(std::span<const StatFeatureVector>(xs.data(), 1)), ConfigError);
    CHECK_THROWS_AS(fit_normalizer({}), ConfigError);
}
