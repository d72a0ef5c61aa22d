#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mffnc/corpus.hpp"

namespace mffnc {

inline constexpr std::size_t kNumStatFeatures = 6;

// Six behavioral statistics of one user timeline, in this fixed order.
struct StatFeatureVector {
    double p_original = 0.0;
    double p_late_night = 0.0;
    double posts_per_week = 0.0;
    double posting_time_sd = 0.0;  // minutes
    double p_negative = 0.0;
    double image_freq = 0.0;

    std::array<double, kNumStatFeatures> to_array() const;
    static StatFeatureVector from_array(const std::array<double, kNumStatFeatures>& a);

    friend bool operator==(const StatFeatureVector&, const StatFeatureVector&) = default;
};

inline constexpr std::array<std::string_view, kNumStatFeatures> kStatFeatureNames = {
    "p_original", "p_late_night", "posts_per_week", "posting_time_sd", "p_negative", "image_freq"};

// Maps a text onto a negativity score in [0, 1]. Implementations must be
// deterministic and safe for concurrent const use.
class SentimentScorer {
public:
    virtual ~SentimentScorer() = default;
    virtual double score(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

// Set of negative terms. Each term is stored in tokenized form, so a term
// such as a two-character CJK word matches the corresponding run of
// single-character tokens.
class Lexicon {
public:
    Lexicon() = default;
    explicit Lexicon(const std::vector<std::string>& terms);

    // Built-in list of negative terms (Chinese and English).
    static const Lexicon& builtin();
    // UTF-8, one term per line; '#' starts a comment; blank lines ignored.
    static Lexicon from_file(const std::string& path);

    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }
    std::size_t max_term_tokens() const { return max_tokens_; }
    bool contains(std::span<const std::string> tokens) const;
    bool contains_term(std::string_view term) const;

private:
    std::vector<std::vector<std::string>> terms_;  // sorted, unique
    std::size_t max_tokens_ = 0;
};

// Fraction of tokens covered by lexicon terms. Terms are matched greedily,
// longest first, left to right over the token stream; each matched term
// covers all of its tokens. Empty text scores 0.
double lexicon_score(std::string_view text, const Lexicon& lexicon);

class LexiconScorer final : public SentimentScorer {
public:
    LexiconScorer();  // built-in lexicon
    explicit LexiconScorer(Lexicon lexicon);

    double score(std::string_view text) const override { return lexicon_score(text, lexicon_); }
    std::string name() const override { return "lexicon"; }
    const Lexicon& lexicon() const { return lexicon_; }

private:
    Lexicon lexicon_;
};

inline constexpr double kDefaultNegativeThreshold = 0.5;

double proportion_original(std::span<const Tweet> tweets);
// Posts whose clock time falls in [00:00:00, 06:00:00).
double proportion_late_night(std::span<const Tweet> tweets);
// Tweets per week of observed span; the span is floored at one day, so a
// single tweet gives 7. Zero tweets give 0.
double posts_per_week(std::span<const Tweet> tweets);
// Population SD of time of day in minutes; 0 for fewer than two tweets.
double posting_time_sd(std::span<const Tweet> tweets);
// Fraction of tweets whose score exceeds threshold. A scorer exception or an
// out-of-range score becomes a FeatureError naming the tweet index.
double proportion_negative(std::span<const Tweet> tweets, const SentimentScorer& scorer,
                           double threshold = kDefaultNegativeThreshold);
double image_frequency(std::span<const Tweet> tweets);

// An empty timeline yields the all-zero vector.
StatFeatureVector extract_features(const UserRecord& user, const SentimentScorer& scorer,
                                   double threshold = kDefaultNegativeThreshold);

namespace serial {
std::vector<StatFeatureVector> extract_all(std::span<const UserRecord> users, const SentimentScorer& scorer,
                                           double threshold = kDefaultNegativeThreshold);
}
namespace parallel {
// OpenMP over users; identical output to serial::extract_all.
std::vector<StatFeatureVector> extract_all(std::span<const UserRecord> users, const SentimentScorer& scorer,
                                           double threshold = kDefaultNegativeThreshold);
}

// Per-component z-score fitted on training vectors.
struct FeatureNormalizer {
    static constexpr double kStdFloor = 1e-8;

    std::array<double, kNumStatFeatures> mean{};
    std::array<double, kNumStatFeatures> std{1, 1, 1, 1, 1, 1};

    std::array<double, kNumStatFeatures> apply(const StatFeatureVector& v) const;
    StatFeatureVector invert(const std::array<double, kNumStatFeatures>& z) const;

    friend bool operator==(const FeatureNormalizer&, const FeatureNormalizer&) = default;
};

// Population mean and SD per component, SD floored at kStdFloor. Throws
// ConfigError for fewer than two vectors.
FeatureNormalizer fit_normalizer(std::span<const StatFeatureVector> train);

}  // namespace mffnc
