#include "mffnc/features.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>

#include "mffnc/error.hpp"
#include "mffnc/text.hpp"

namespace mffnc {

namespace {

constexpr std::int64_t kLateNightEndSeconds = 6 * 3600;
constexpr double kSecondsPerDay = 86400.0;

double fraction(std::size_t hits, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

const std::vector<std::string>& builtin_terms() {
    static const std::vector<std::string> terms = {
        // Chinese
        "孤独", "绝望", "抑郁", "痛苦", "难过", "失眠", "崩溃", "疲惫", "焦虑", "伤心", "无助", "空虚",
        "压抑", "悲伤", "失望", "后悔", "害怕", "自杀", "讨厌", "厌世", "心累", "没意思", "想死", "哭",
        "累", "烦", "死",
        // English
        "alone", "anxious", "cry", "crying", "depressed", "despair", "die", "empty", "exhausted", "hate",
        "hopeless", "hurt", "insomnia", "lonely", "miserable", "pain", "sad", "suicide", "tired",
        "worthless"};
    return terms;
}

}  // namespace

std::array<double, kNumStatFeatures> StatFeatureVector::to_array() const {
    return {p_original, p_late_night, posts_per_week, posting_time_sd, p_negative, image_freq};
}

StatFeatureVector StatFeatureVector::from_array(const std::array<double, kNumStatFeatures>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
}

Lexicon::Lexicon(const std::vector<std::string>& terms) {
    for (const std::string& term : terms) {
        auto toks = tokenize(term);
        if (toks.empty()) continue;
        max_tokens_ = std::max(max_tokens_, toks.size());
        terms_.push_back(std::move(toks));
    }
    std::sort(terms_.begin(), terms_.end());
    terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
}

const Lexicon& Lexicon::builtin() {
    static const Lexicon lex(builtin_terms());
    return lex;
}

Lexicon Lexicon::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file: " + path);
    std::vector<std::string> terms;
    for (std::string line; std::getline(in, line);) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        terms.push_back(line.substr(first, last - first + 1));
    }
    Lexicon lex(terms);
    if (lex.empty()) throw FormatError("lexicon file has no terms: " + path);
    return lex;
}

bool Lexicon::contains(std::span<const std::string> tokens) const {
    return std::binary_search(terms_.begin(), terms_.end(), tokens,
                              [](const auto& a, const auto& b) {
                                  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
                              });
}

bool Lexicon::contains_term(std::string_view term) const {
    const auto toks = tokenize(term);
    return !toks.empty() && contains(toks);
}

double lexicon_score(std::string_view text, const Lexicon& lexicon) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) return 0.0;
    std::size_t covered = 0;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t matched = 0;
        const std::size_t longest = std::min(lexicon.max_term_tokens(), tokens.size() - i);
        for (std::size_t len = longest; len >= 1; --len) {
            if (lexicon.contains(std::span<const std::string>(tokens).subspan(i, len))) {
                matched = len;
                break;
            }
        }
        covered += matched;
        i += matched == 0 ? 1 : matched;
    }
    return fraction(covered, tokens.size());
}

LexiconScorer::LexiconScorer() : lexicon_(Lexicon::builtin()) {}
LexiconScorer::LexiconScorer(Lexicon lexicon) : lexicon_(std::move(lexicon)) {
    if (lexicon_.empty()) throw ConfigError("lexicon must not be empty");
}

double proportion_original(std::span<const Tweet> tweets) {
    return fraction(std::count_if(tweets.begin(), tweets.end(), [](const Tweet& t) { return t.is_original; }),
                    tweets.size());
}

double proportion_late_night(std::span<const Tweet> tweets) {
    return fraction(std::count_if(tweets.begin(), tweets.end(),
                                  [](const Tweet& t) {
                                      return t.posting_time.seconds_of_day() < kLateNightEndSeconds;
                                  }),
                    tweets.size());
}

double posts_per_week(std::span<const Tweet> tweets) {
    if (tweets.empty()) return 0.0;
    const auto [first, last] = std::minmax_element(
        tweets.begin(), tweets.end(),
        [](const Tweet& a, const Tweet& b) { return a.posting_time < b.posting_time; });
    const double span_days =
        static_cast<double>(last->posting_time.seconds() - first->posting_time.seconds()) / kSecondsPerDay;
    const double weeks = std::max(span_days, 1.0) / 7.0;
    return static_cast<double>(tweets.size()) / weeks;
}

double posting_time_sd(std::span<const Tweet> tweets) {
    if (tweets.size() < 2) return 0.0;
    const double n = static_cast<double>(tweets.size());
    double mean = 0.0;
    for (const Tweet& t : tweets) mean += t.posting_time.minutes_of_day();
    mean /= n;
    double ss = 0.0;
    for (const Tweet& t : tweets) {
        const double d = t.posting_time.minutes_of_day() - mean;
        ss += d * d;
    }
    return std::sqrt(ss / n);
}

double proportion_negative(std::span<const Tweet> tweets, const SentimentScorer& scorer, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("negativity threshold must lie in [0, 1], got " + std::to_string(threshold));
    std::size_t negative = 0;
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        double s = 0.0;
        try {
            s = scorer.score(tweets[i].text);
        } catch (const std::exception& e) {
            throw FeatureError("sentiment scorer '" + scorer.name() + "' failed on tweet " + std::to_string(i) +
                               ": " + e.what());
        }
        if (!(s >= 0.0 && s <= 1.0))
            throw FeatureError("sentiment scorer '" + scorer.name() + "' returned " + std::to_string(s) +
                               " for tweet " + std::to_string(i));
        if (s > threshold) ++negative;
    }
    return fraction(negative, tweets.size());
}

double image_frequency(std::span<const Tweet> tweets) {
    return fraction(std::count_if(tweets.begin(), tweets.end(), [](const Tweet& t) { return t.has_images; }),
                    tweets.size());
}

StatFeatureVector extract_features(const UserRecord& user, const SentimentScorer& scorer, double threshold) {
    const std::span<const Tweet> tweets(user.tweets);
    StatFeatureVector v;
    v.p_original = proportion_original(tweets);
    v.p_late_night = proportion_late_night(tweets);
    v.posts_per_week = posts_per_week(tweets);
    v.posting_time_sd = posting_time_sd(tweets);
    v.p_negative = proportion_negative(tweets, scorer, threshold);
    v.image_freq = image_frequency(tweets);
    return v;
}

namespace serial {

std::vector<StatFeatureVector> extract_all(std::span<const UserRecord> users, const SentimentScorer& scorer,
                                           double threshold) {
    std::vector<StatFeatureVector> out;
    out.reserve(users.size());
    for (const UserRecord& u : users) out.push_back(extract_features(u, scorer, threshold));
    return out;
}

}  // namespace serial

namespace parallel {

std::vector<StatFeatureVector> extract_all(std::span<const UserRecord> users, const SentimentScorer& scorer,
                                           double threshold) {
    std::vector<StatFeatureVector> out(users.size());
    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(users.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = extract_features(users[static_cast<std::size_t>(i)], scorer, threshold);
        } catch (...) {
#pragma omp critical(mffnc_extract_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace parallel

std::array<double, kNumStatFeatures> FeatureNormalizer::apply(const StatFeatureVector& v) const {
    auto a = v.to_array();
    for (std::size_t j = 0; j < kNumStatFeatures; ++j) a[j] = (a[j] - mean[j]) / std[j];
    return a;
}

StatFeatureVector FeatureNormalizer::invert(const std::array<double, kNumStatFeatures>& z) const {
    std::array<double, kNumStatFeatures> a{};
    for (std::size_t j = 0; j < kNumStatFeatures; ++j) a[j] = z[j] * std[j] + mean[j];
    return StatFeatureVector::from_array(a);
}

FeatureNormalizer fit_normalizer(std::span<const StatFeatureVector> train) {
    if (train.size() < 2)
        throw ConfigError("normalizer needs at least 2 training vectors, got " + std::to_string(train.size()));
    FeatureNormalizer norm;
    const double n = static_cast<double>(train.size());
    for (std::size_t j = 0; j < kNumStatFeatures; ++j) {
        double mean = 0.0;
        for (const auto& v : train) mean += v.to_array()[j];
        mean /= n;
        double ss = 0.0;
        for (const auto& v : train) {
            const double d = v.to_array()[j] - mean;
            ss += d * d;
        }
        // Exact mean for constant columns so they normalize to exactly 0.
        const auto [lo, hi] = std::minmax_element(train.begin(), train.end(), [j](const auto& a, const auto& b) {
            return a.to_array()[j] < b.to_array()[j];
        });
        norm.mean[j] = lo->to_array()[j] == hi->to_array()[j] ? lo->to_array()[j] : mean;
        norm.std[j] = std::max(std::sqrt(ss / n), FeatureNormalizer::kStdFloor);
    }
    return norm;
}

}  // namespace mffnc
