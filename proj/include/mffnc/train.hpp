#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mffnc/metrics.hpp"
#include "mffnc/model.hpp"
#include "mffnc/tensor.hpp"

namespace mffnc {

struct TrainConfig {
    // The original setup used 1e-6 with a pretrained encoder; a randomly
    // initialised toy encoder needs a much larger step to move in 30 epochs.
    static constexpr double kReferenceLearningRate = 1e-6;

    double learning_rate = 1e-3;
    std::size_t batch_size = 8;
    std::size_t epochs = 30;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
    std::size_t early_stop_patience = 0;  // 0 = off
    // Off by default so history files stay byte-identical across runs.
    bool record_wall_clock = false;
};

// Throws ConfigError for lr <= 0 (or non-finite), batch_size 0, betas outside
// [0,1) or epsilon <= 0. lr == 0 is allowed only through adam_step directly.
void validate(const TrainConfig& config);

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::uint64_t t = 0;
};

// Adam with bias correction over params (in a fixed order). The state is
// sized on first use. Throws UsageError when a trainable parameter has no
// gradient or the parameter list changed shape.
void adam_step(std::span<const Tensor> params, AdamState& state, const TrainConfig& config);

// Mean over rows of -log softmax(logits)[label], log-sum-exp stabilised.
// Throws UsageError for labels outside {0,1} or a count mismatch.
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

struct Example {
    std::string user_id;
    ModelInput input;
    int label = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double val_f1 = 0.0;
    double seconds = 0.0;
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 1-based, 0 when no epoch ran
};

// epoch,train_loss,val_acc,val_f1,seconds
std::string history_to_csv(const TrainHistory& history);

struct TrainResult {
    FusionModel model;
    TrainHistory history;
};

// Mini-batch Adam over train_set, evaluating on val_set after every epoch.
// Returns the final model, or the best-validation-accuracy one when early
// stopping is on. Throws ConfigError for an empty train_set or, when epochs
// > 0, an empty val_set.
TrainResult train(FusionModel model, std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& config);

// B x 2 logits, one user at a time, parallel over users.
Matrix predict_logits(const FusionModel& model, std::span<const Example> dataset);
// Index of the larger logit; a tie goes to class 0.
int predicted_class(std::span<const double> logits);
// Softmax probability of class 1.
double prob_depressed(std::span<const double> logits);

// Throws UsageError for an empty dataset.
MetricsReport evaluate(const FusionModel& model, std::span<const Example> dataset);

}  // namespace mffnc
