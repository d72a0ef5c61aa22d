#include "mffnc/synth.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "mffnc/error.hpp"

namespace mffnc {

namespace {

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kLateNightEnd = 6 * 3600;

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

void check_range(const IntRange& r, std::int64_t min_lo, const char* what) {
    if (r.lo < min_lo || r.hi < r.lo) throw ConfigError(std::string(what) + " range is empty or invalid");
}

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

nlohmann::ordered_json signal_json(const ClassSignal& s) {
    nlohmann::ordered_json j;
    j["late_night_rate"] = s.late_night_rate;
    j["negative_word_rate"] = s.negative_word_rate;
    j["original_rate"] = s.original_rate;
    j["image_rate"] = s.image_rate;
    return j;
}

}  // namespace

const std::vector<std::string>& default_neutral_words() {
    // Shares no character with any built-in lexicon term.
    static const std::vector<std::string> words = {
        "今天", "天气", "朋友", "吃饭", "电影", "音乐", "工作", "周末", "咖啡", "旅行", "学习", "运动",
        "城市", "阳光", "晚餐", "公园", "照片", "小猫", "game", "coffee", "movie", "weekend", "music", "lunch"};
    return words;
}

const std::vector<std::string>& default_negative_words() {
    static const std::vector<std::string> words = {
        "孤独", "绝望", "痛苦", "难过", "失眠", "崩溃", "疲惫", "焦虑", "伤心", "无助", "空虚", "压抑",
        "悲伤", "失望", "lonely", "hopeless", "tired", "sad"};
    return words;
}

SynthParams default_synth_params() {
    SynthParams p;
    p.neutral_words = default_neutral_words();
    p.negative_words = default_negative_words();
    return p;
}

void validate(const SynthParams& params) {
    for (const ClassSignal* s : {&params.normal, &params.depressed}) {
        check_probability(s->late_night_rate, "late_night_rate");
        check_probability(s->negative_word_rate, "negative_word_rate");
        check_probability(s->original_rate, "original_rate");
        check_probability(s->image_rate, "image_rate");
    }
    check_range(params.tweets_per_user, 0, "tweets_per_user");
    check_range(params.span_days, 1, "span_days");
    check_range(params.words_per_tweet, 1, "words_per_tweet");
    if (params.neutral_words.empty() || params.negative_words.empty())
        throw ConfigError("synthetic word pools must be non-empty");
}

UserRecord generate_user(Label label, const SynthParams& params, Rng& rng) {
    const ClassSignal& sig = params.signal(label);
    UserRecord user;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%012llx", static_cast<unsigned long long>(rng.next() >> 16));
    user.user_id = std::string("u") + buf;
    std::snprintf(buf, sizeof buf, "user%06llx", static_cast<unsigned long long>(rng.next() & 0xFFFFFF));
    user.nickname = buf;
    const auto g = rng.below(3);
    user.gender = g == 0 ? Gender::male : g == 1 ? Gender::female : Gender::unknown;
    const auto profile_words = rng.between(0, 3);
    for (std::int64_t i = 0; i < profile_words; ++i) {
        if (i > 0) user.profile += ' ';
        user.profile += pick(params.neutral_words, rng);
    }
    if (rng.bernoulli(0.5)) {
        std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lld", static_cast<long long>(rng.between(1970, 2005)),
                      static_cast<long long>(rng.between(1, 12)), static_cast<long long>(rng.between(1, 28)));
        user.birthday = buf;
    }
    user.num_followers = rng.between(0, 5000);
    user.num_followings = rng.between(0, 2000);
    user.label = label;

    const Timestamp start = Timestamp::from_civil(2020, 1, 1, 0, 0, 0);
    const std::int64_t first_day = rng.between(0, 364);
    const std::int64_t span = rng.between(params.span_days.lo, params.span_days.hi);
    const std::int64_t count = rng.between(params.tweets_per_user.lo, params.tweets_per_user.hi);
    user.tweets.reserve(static_cast<std::size_t>(count));
    for (std::int64_t t = 0; t < count; ++t) {
        Tweet tweet;
        const std::int64_t day = first_day + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span)));
        const std::int64_t clock = rng.bernoulli(sig.late_night_rate)
                                       ? rng.between(0, kLateNightEnd - 1)
                                       : rng.between(kLateNightEnd, kDay - 1);
        tweet.posting_time = Timestamp(start.seconds() + day * kDay + clock);
        const std::int64_t words = rng.between(params.words_per_tweet.lo, params.words_per_tweet.hi);
        for (std::int64_t w = 0; w < words; ++w) {
            if (w > 0) tweet.text += ' ';
            tweet.text += rng.bernoulli(sig.negative_word_rate) ? pick(params.negative_words, rng)
                                                                : pick(params.neutral_words, rng);
        }
        tweet.is_original = rng.bernoulli(sig.original_rate);
        tweet.has_images = rng.bernoulli(sig.image_rate);
        tweet.num_likes = rng.between(0, 200);
        tweet.num_forwards = rng.between(0, 50);
        tweet.num_comments = rng.between(0, 80);
        user.tweets.push_back(std::move(tweet));
    }
    sort_tweets(user);
    return user;
}

std::vector<UserRecord> generate_dataset(const SynthDatasetSpec& spec) {
    if (spec.n_per_class < 1) throw ConfigError("n_per_class must be at least 1");
    validate(spec.params);
    const std::size_t n = spec.n_per_class;
    std::vector<UserRecord> users(2 * n);
    const auto total = static_cast<std::ptrdiff_t>(users.size());
    // Every user draws from its own stream, so generation order is irrelevant.
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t k = 0; k < total; ++k) {
        const auto idx = static_cast<std::size_t>(k);
        const Label label = idx < n ? Label::normal : Label::depressed;
        Rng rng(derive_seed(spec.seed, idx));
        users[idx] = generate_user(label, spec.params, rng);
    }
    Rng order(derive_seed(spec.seed, 0xD15EA5E));
    order.shuffle(std::span<UserRecord>(users));
    char buf[32];
    for (std::size_t i = 0; i < users.size(); ++i) {
        std::snprintf(buf, sizeof buf, "u%06zu", i + 1);
        users[i].user_id = buf;
    }
    return users;
}

std::string spec_to_json(const SynthDatasetSpec& spec) {
    nlohmann::ordered_json j;
    j["generator"] = "splitmix64";
    j["n_per_class"] = spec.n_per_class;
    j["seed"] = spec.seed;
    j["normal"] = signal_json(spec.params.normal);
    j["depressed"] = signal_json(spec.params.depressed);
    j["tweets_per_user"] = {spec.params.tweets_per_user.lo, spec.params.tweets_per_user.hi};
    j["span_days"] = {spec.params.span_days.lo, spec.params.span_days.hi};
    j["words_per_tweet"] = {spec.params.words_per_tweet.lo, spec.params.words_per_tweet.hi};
    j["neutral_words"] = spec.params.neutral_words;
    j["negative_words"] = spec.params.negative_words;
    return j.dump(2) + "\n";
}

}  // namespace mffnc
