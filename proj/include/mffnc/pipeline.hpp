#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mffnc/corpus.hpp"
#include "mffnc/features.hpp"
#include "mffnc/model.hpp"
#include "mffnc/text.hpp"
#include "mffnc/train.hpp"

namespace mffnc {

// Everything a training run depends on. One seed feeds the split, the
// parameter init and the batch order.
struct RunConfig {
    ModelConfig model;  // vocab_size is filled in from the built vocabulary
    TrainConfig train;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
    std::size_t min_freq = 1;
    double negative_threshold = kDefaultNegativeThreshold;
};

inline constexpr std::uint64_t kInitStream = 1;

SplitSpec split_spec(const RunConfig& config);

// Model inputs for users, using the model's vocab (toy encoder) or the
// precomputed matrices (keyed by user_id) plus the model's normalizer.
// Throws FormatError when a user has no precomputed matrix.
std::vector<Example> make_examples(const FusionModel& model, std::span<const UserRecord> users,
                                   std::span<const StatFeatureVector> features,
                                   const PrecomputedEmbeddings* embeddings = nullptr);

struct ExperimentResult {
    TrainResult trained;
    MetricsReport validation;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
};

// Split, featurize, fit the normalizer and vocabulary on the training part,
// initialise, train and evaluate on the validation part.
ExperimentResult run_experiment(const std::vector<UserRecord>& users, const RunConfig& config,
                                const SentimentScorer& scorer, const PrecomputedEmbeddings* embeddings = nullptr);

struct AblationEntry {
    std::string name;  // e.g. "cross_attention_r2"
    FusionMode fusion = FusionMode::cross_attention;
    std::size_t refine_layers = 0;
    ExperimentResult result;
};

// The same run under fusion in {cross_attention, concat} x refine_layers in
// {0, 2}; everything else is taken from config unchanged.
std::vector<AblationEntry> run_ablation(const std::vector<UserRecord>& users, const RunConfig& config,
                                        const SentimentScorer& scorer,
                                        const PrecomputedEmbeddings* embeddings = nullptr);

// Share of corpus tokens the vocabulary knows. Used to reject a checkpoint
// applied to an unrelated corpus.
double vocab_coverage(const Vocab& vocab, std::span<const UserRecord> users);

}  // namespace mffnc
