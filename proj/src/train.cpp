#include "mffnc/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <optional>

#include "mffnc/error.hpp"
#include "mffnc/rng.hpp"

namespace mffnc {

namespace {

constexpr std::uint64_t kShuffleStream = 3;

double lse2(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

void validate(const TrainConfig& c) {
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate))
        throw ConfigError("learning rate must be positive and finite");
    if (c.batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(c.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

void adam_step(std::span<const Tensor> params, AdamState& state, const TrainConfig& c) {
    if (state.m.empty() && state.t == 0) {
        for (const Tensor& p : params) {
            state.m.emplace_back(p.rows(), p.cols());
            state.v.emplace_back(p.rows(), p.cols());
        }
    }
    if (state.m.size() != params.size()) throw UsageError("Adam state does not match the parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad())
            throw UsageError("parameter " + std::to_string(i) + " has no gradient; run backward() first");
        if (!state.m[i].same_shape(params[i].value())) throw UsageError("Adam state shape mismatch");
    }
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        const Matrix& g = p.grad();
        Matrix& w = p.mutable_value();
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m.data[k] = c.beta1 * m.data[k] + (1.0 - c.beta1) * g.data[k];
            v.data[k] = c.beta2 * v.data[k] + (1.0 - c.beta2) * g.data[k] * g.data[k];
            const double m_hat = m.data[k] / bc1;
            const double v_hat = v.data[k] / bc2;
            w.data[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
    const Matrix& z = logits.value();
    if (z.cols != 2) throw DimensionError("cross_entropy_loss expects B x 2 logits, got " + z.shape_string());
    if (labels.size() != z.rows)
        throw UsageError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(z.rows) + " rows");
    if (z.rows == 0) throw UsageError("cross_entropy_loss on an empty batch");
    for (int l : labels)
        if (l != 0 && l != 1) throw UsageError("label " + std::to_string(l) + " is not 0 or 1");
    // d loss / d z = (softmax(z) - onehot(y)) / B
    Matrix dz(z.rows, 2);
    double total = 0.0;
    const double n = static_cast<double>(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) {
        const double lse = lse2(z(i, 0), z(i, 1));
        const auto y = static_cast<std::size_t>(labels[i]);
        total += lse - z(i, y);
        for (std::size_t j = 0; j < 2; ++j) dz(i, j) = (std::exp(z(i, j) - lse) - (j == y ? 1.0 : 0.0)) / n;
    }
    return Tensor::from_op("cross_entropy", Matrix(1, 1, total / n), {logits},
                           [dz = std::move(dz)](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               if (!grads[0]) return;
                               for (std::size_t k = 0; k < dz.size(); ++k) grads[0]->data[k] += g.data[0] * dz.data[k];
                           });
}

int predicted_class(std::span<const double> logits) { return logits[1] > logits[0] ? 1 : 0; }

double prob_depressed(std::span<const double> logits) {
    return 1.0 / (1.0 + std::exp(logits[0] - logits[1]));
}

Matrix predict_logits(const FusionModel& model, std::span<const Example> dataset) {
    Matrix out(dataset.size(), 2);
    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(dataset.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            NoGradGuard no_grad;
            const auto idx = static_cast<std::size_t>(i);
            const Tensor logits = forward(model, std::span<const ModelInput>(&dataset[idx].input, 1));
            out(idx, 0) = logits.value().data[0];
            out(idx, 1) = logits.value().data[1];
        } catch (...) {
#pragma omp critical(mffnc_predict_error)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

MetricsReport evaluate(const FusionModel& model, std::span<const Example> dataset) {
    if (dataset.empty()) throw UsageError("evaluate on an empty dataset");
    const Matrix logits = predict_logits(model, dataset);
    std::vector<int> predictions(dataset.size());
    std::vector<int> labels(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        predictions[i] = predicted_class(logits.row(i));
        labels[i] = dataset[i].label;
    }
    return metrics_from_confusion(compute_confusion(predictions, labels));
}

std::string history_to_csv(const TrainHistory& history) {
    std::string out = "epoch,train_loss,val_acc,val_f1,seconds\n";
    char buf[160];
    for (const EpochRecord& e : history.epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.9f,%.6f,%.6f,%.3f\n", e.epoch, e.train_loss, e.val_accuracy, e.val_f1,
                      e.seconds);
        out += buf;
    }
    return out;
}

TrainResult train(FusionModel model, std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& config) {
    validate(config);
    if (train_set.empty()) throw ConfigError("training set is empty");
    TrainHistory history;
    if (config.epochs == 0) return {std::move(model), std::move(history)};
    if (val_set.empty()) throw ConfigError("validation set is empty");

    std::vector<Tensor> params;
    for (const NamedParameter& p : model.parameters()) params.push_back(p.tensor);
    AdamState adam;
    Rng rng(derive_seed(config.seed, kShuffleStream));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::optional<FusionModel> best;
    double best_accuracy = -1.0;
    std::size_t since_best = 0;
    std::vector<ModelInput> inputs;
    std::vector<int> labels;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        if (config.shuffle_each_epoch) rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            inputs.clear();
            labels.clear();
            for (std::size_t k = begin; k < end; ++k) {
                inputs.push_back(train_set[order[k]].input);
                labels.push_back(train_set[order[k]].label);
            }
            model.zero_grad();
            const Tensor loss = cross_entropy_loss(forward(model, inputs), labels);
            loss_sum += loss.item() * static_cast<double>(end - begin);
            loss.backward();
            adam_step(params, adam, config);
        }
        const MetricsReport val = evaluate(model, val_set);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.val_accuracy = val.accuracy;
        rec.val_f1 = val.f1;
        if (config.record_wall_clock)
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        history.epochs.push_back(rec);

        if (val.accuracy > best_accuracy) {
            best_accuracy = val.accuracy;
            history.best_epoch = epoch;
            since_best = 0;
            if (config.early_stop_patience > 0) best = model.clone();
        } else if (config.early_stop_patience > 0 && ++since_best >= config.early_stop_patience) {
            break;
        }
    }
    model.zero_grad();
    if (best) return {std::move(*best), std::move(history)};
    return {std::move(model), std::move(history)};
}

}  // namespace mffnc
