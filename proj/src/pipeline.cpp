#include "mffnc/pipeline.hpp"

#include "mffnc/error.hpp"
#include "mffnc/rng.hpp"

namespace mffnc {

SplitSpec split_spec(const RunConfig& config) { return SplitSpec{config.split_ratio, config.seed}; }

std::vector<Example> make_examples(const FusionModel& model, std::span<const UserRecord> users,
                                   std::span<const StatFeatureVector> features,
                                   const PrecomputedEmbeddings* embeddings) {
    if (users.size() != features.size()) throw UsageError("make_examples: users and features differ in length");
    const bool toy = model.config().encoder == EncoderKind::toy;
    if (!toy && embeddings == nullptr) throw ConfigError("the precomputed encoder needs an embeddings file");
    std::vector<Example> out(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
        Example& ex = out[i];
        ex.user_id = users[i].user_id;
        ex.label = static_cast<int>(users[i].label);
        ex.input.stats = model.normalizer.apply(features[i]);
        if (toy) {
            ex.input.text = build_user_sequence(users[i], model.vocab, model.config().max_len);
        } else {
            auto it = embeddings->by_user.find(users[i].user_id);
            if (it == embeddings->by_user.end())
                throw FormatError("no precomputed embedding for user " + users[i].user_id);
            ex.input.text = it->second;
        }
    }
    return out;
}

ExperimentResult run_experiment(const std::vector<UserRecord>& users, const RunConfig& config,
                                const SentimentScorer& scorer, const PrecomputedEmbeddings* embeddings) {
    if (users.empty()) throw ConfigError("no usable users in the corpus");
    validate(config.train);
    const Split split = split_dataset(users, split_spec(config));
    if (split.train.size() < 2) throw ConfigError("training split has fewer than 2 users");

    const auto train_features = parallel::extract_all(split.train, scorer, config.negative_threshold);
    const auto val_features = parallel::extract_all(split.validation, scorer, config.negative_threshold);

    ModelConfig mc = config.model;
    Vocab vocab;
    if (mc.encoder == EncoderKind::toy) {
        vocab = build_vocab(split.train, config.min_freq);
        mc.vocab_size = vocab.size();
    } else {
        if (embeddings == nullptr) throw ConfigError("the precomputed encoder needs an embeddings file");
        if (embeddings->width != 0 && embeddings->width != mc.d1)
            throw ConfigError("embeddings have width " + std::to_string(embeddings->width) + " but d1 is " +
                              std::to_string(mc.d1));
    }
    FusionModel model = FusionModel::init(mc, derive_seed(config.seed, kInitStream));
    model.vocab = std::move(vocab);
    model.normalizer = fit_normalizer(train_features);
    model.negative_threshold = config.negative_threshold;

    const auto train_set = make_examples(model, split.train, train_features, embeddings);
    const auto val_set = make_examples(model, split.validation, val_features, embeddings);
    TrainConfig tc = config.train;
    tc.seed = config.seed;

    ExperimentResult result{train(std::move(model), train_set, val_set, tc), {}, train_set.size(), val_set.size()};
    if (!val_set.empty()) result.validation = evaluate(result.trained.model, val_set);
    return result;
}

std::vector<AblationEntry> run_ablation(const std::vector<UserRecord>& users, const RunConfig& config,
                                        const SentimentScorer& scorer, const PrecomputedEmbeddings* embeddings) {
    std::vector<AblationEntry> out;
    for (FusionMode fusion : {FusionMode::cross_attention, FusionMode::concat}) {
        for (std::size_t layers : {std::size_t{0}, std::size_t{2}}) {
            RunConfig variant = config;
            variant.model.fusion = fusion;
            variant.model.refine_layers = layers;
            out.push_back(AblationEntry{std::string(to_string(fusion)) + "_r" + std::to_string(layers), fusion, layers,
                                        run_experiment(users, variant, scorer, embeddings)});
        }
    }
    return out;
}

double vocab_coverage(const Vocab& vocab, std::span<const UserRecord> users) {
    std::size_t known = 0;
    std::size_t total = 0;
    auto count = [&](std::string_view text) {
        for (const auto& t : tokenize(text)) {
            ++total;
            if (vocab.encode(t) != Vocab::kUnk) ++known;
        }
    };
    for (const UserRecord& u : users) {
        count(u.nickname);
        count(u.profile);
        for (const Tweet& t : u.tweets) count(t.text);
    }
    return total == 0 ? 1.0 : static_cast<double>(known) / static_cast<double>(total);
}

}  // namespace mffnc
