#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mffnc/corpus.hpp"
#include "mffnc/rng.hpp"

namespace mffnc {

// Behavioral signal of one class.
struct ClassSignal {
    double late_night_rate = 0.0;
    double negative_word_rate = 0.0;
    double original_rate = 0.0;
    double image_rate = 0.0;
};

struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;  // inclusive
};

struct SynthParams {
    ClassSignal normal{0.1, 0.1, 0.5, 0.5};
    ClassSignal depressed{0.8, 0.7, 0.9, 0.2};
    IntRange tweets_per_user{20, 40};
    IntRange span_days{14, 28};
    IntRange words_per_tweet{3, 6};
    std::vector<std::string> neutral_words;   // defaults from default_neutral_words()
    std::vector<std::string> negative_words;  // must all be in the scoring lexicon

    const ClassSignal& signal(Label label) const { return label == Label::depressed ? depressed : normal; }
};

const std::vector<std::string>& default_neutral_words();
const std::vector<std::string>& default_negative_words();
SynthParams default_synth_params();

// Throws ConfigError for probabilities outside [0,1], empty or inverted
// ranges, or empty word pools.
void validate(const SynthParams& params);

struct SynthDatasetSpec {
    std::size_t n_per_class = 250;
    std::uint64_t seed = 0;
    SynthParams params = default_synth_params();
};

// One user of the given class. Per tweet: a day offset uniform in the span,
// a clock time uniform in [00:00, 06:00) with probability late_night_rate
// else uniform in [06:00, 24:00), words drawn from the negative pool with
// probability negative_word_rate else the neutral pool, and Bernoulli
// is_original / has_images. Tweets come back sorted by time.
UserRecord generate_user(Label label, const SynthParams& params, Rng& rng);

// n_per_class users of each label, each from its own derived stream, shuffled
// with a derived stream and then numbered u000001, u000002, ... in output order.
std::vector<UserRecord> generate_dataset(const SynthDatasetSpec& spec);

// JSON description of a spec, written next to generated corpora.
std::string spec_to_json(const SynthDatasetSpec& spec);

}  // namespace mffnc
