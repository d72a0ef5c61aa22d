#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "mffnc/error.hpp"
#include "mffnc/synth.hpp"
#include "mffnc/text.hpp"

using namespace mffnc;
using Tokens = std::vector<std::string>;

TEST_CASE("tokenize") {
    CHECK(tokenize("hello world") == Tokens{"hello", "world"});
    CHECK(tokenize("我 很累") == Tokens{"我", "很", "累"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("  \t\n ").empty());
    CHECK(tokenize("Hello WORLD") == Tokens{"hello", "world"});
    CHECK(tokenize("好ok吗") == Tokens{"好", "ok", "吗"});
    CHECK(tokenize("a　b") == Tokens{"a", "b"});
    // Non-ASCII letters outside the CJK ranges are left alone.
    CHECK(tokenize("Éa") == Tokens{"Éa"});
}

TEST_CASE("build_vocab ordering and thresholds") {
    UserRecord u = fx::user("a", Label::normal,
                            {fx::tweet("2020-01-01 00:00:00", "a a a a a b c c"), fx::tweet("2020-01-02 00:00:00", "b")});
    u.nickname = "";
    const Vocab v = build_vocab({u}, 1);
    REQUIRE(v.size() == 7);
    CHECK(v.decode(0) == "[PAD]");
    CHECK(v.decode(Vocab::kCls) == "[CLS]");
    CHECK(v.encode("a") == 4);
    // b and c both appear twice; b sorts first.
    CHECK(v.encode("b") == 5);
    CHECK(v.encode("c") == 6);

    const Vocab strict = build_vocab({u}, 6);
    CHECK(strict.size() == 4);
    CHECK(strict.encode("a") == Vocab::kUnk);

    const Vocab empty = build_vocab({}, 1);
    CHECK(empty.size() == 4);
    CHECK(empty.encode("[CLS]") == Vocab::kUnk);
}

TEST_CASE("vocab ids are contiguous and round-trip") {
    SynthDatasetSpec spec;
    spec.n_per_class = 10;
    const auto users = generate_dataset(spec);
    const Vocab v = build_vocab(users, 2);
    for (std::size_t id = Vocab::kNumSpecials; id < v.size(); ++id) CHECK(v.encode(v.decode(id)) == id);
    CHECK(v.tokens().size() == v.size());
    CHECK(build_vocab(users, 2) == v);
    CHECK(build_vocab(users, 2).hash() == v.hash());
    CHECK(build_vocab(users, 1).hash() != v.hash());
    CHECK(Vocab::from_tokens(v.tokens(), v.min_freq()) == v);
    CHECK_THROWS_AS(Vocab::from_tokens({"x"}, 1), FormatError);
}

TEST_CASE("build_user_sequence layout") {
    UserRecord u = fx::user("a", Label::normal);
    u.nickname = "a";
    u.profile = "";
    const Vocab v = Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a"}, 1);
    const TokenSequence s = build_user_sequence(u, v, 8);
    CHECK(s.ids == std::vector<std::size_t>{2, 4, 3, 3, 0, 0, 0, 0});
    CHECK(s.true_len == 4);
    CHECK_THROWS_AS(build_user_sequence(u, v, 7), ConfigError);
}

TEST_CASE("build_user_sequence truncates and orders tweets") {
    UserRecord u = fx::user("a", Label::normal,
                            {fx::tweet("2020-01-02 00:00:00", "second"), fx::tweet("2020-01-01 00:00:00", "first")});
    sort_tweets(u);
    u.nickname = "n";
    const Vocab v = Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "n", "first", "second"}, 1);
    const TokenSequence s = build_user_sequence(u, v, 16);
    CHECK(std::vector<std::size_t>(s.ids.begin(), s.ids.begin() + 7) == std::vector<std::size_t>{2, 4, 3, 3, 5, 3, 6});
    CHECK(s.true_len == 7);

    for (int i = 0; i < 20; ++i) u.tweets.push_back(fx::tweet("2020-02-01 00:00:00", "first second"));
    const TokenSequence t = build_user_sequence(u, v, 10);
    CHECK(t.ids.size() == 10);
    CHECK(t.true_len == 10);
    CHECK(t.ids[0] == Vocab::kCls);
}

TEST_CASE("load_precomputed") {
    SUBCASE("two users") {
        std::istringstream in("u1 4 2\n1 2 3 4\n5 6 7 8\n\nu2 4 1\n0.5 -1e-3 0 1\n");
        const auto e = load_precomputed(in);
        CHECK(e.width == 4);
        REQUIRE(e.by_user.size() == 2);
        CHECK(e.by_user.at("u1").rows == 2);
        CHECK(e.by_user.at("u1").cols == 4);
        CHECK(e.by_user.at("u1")(1, 2) == 7.0);
        CHECK(e.by_user.at("u2")(0, 1) == -1e-3);
    }
    SUBCASE("mixed widths name the user") {
        std::istringstream in("u1 4 1\n1 2 3 4\nbad 8 1\n1 2 3 4 5 6 7 8\n");
        try {
            load_precomputed(in);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("bad") != std::string::npos);
        }
    }
    SUBCASE("empty file warns") {
        std::istringstream in("");
        const auto e = load_precomputed(in);
        CHECK(e.by_user.empty());
        CHECK(e.warnings.size() == 1);
    }
    SUBCASE("malformed") {
        for (const char* text : {"u1 2 1\n1 nan\n", "u1 2 1\n1 inf\n", "u1 2 2\n1 2\n", "u1 2 1\n1 2 3\n",
                                 "u1 2 1\n1 2\nu1 2 1\n3 4\n", "u1 x 1\n", "u1 2 1\n1 two\n"}) {
            std::istringstream in(text);
            CHECK_THROWS_AS(load_precomputed(in), FormatError);
        }
    }
    CHECK_THROWS_AS(load_precomputed_file("/nonexistent/emb.txt"), IoError);
}
