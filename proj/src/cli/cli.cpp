#include "mffnc/cli.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "mffnc/corpus.hpp"
#include "mffnc/error.hpp"
#include "mffnc/features.hpp"
#include "mffnc/metrics.hpp"
#include "mffnc/model.hpp"
#include "mffnc/pipeline.hpp"
#include "mffnc/synth.hpp"
#include "mffnc/text.hpp"
#include "mffnc/train.hpp"

namespace mffnc {

namespace {

// Below this share of known tokens a corpus is taken to be unrelated to the
// checkpoint's vocabulary.
constexpr double kMinVocabCoverage = 0.5;

// Every setting a subcommand may read. Defaults here are the documented
// defaults; the config file and then the flags override them.
struct Settings {
    RunConfig run;
    std::size_t n_per_class = 250;
    std::string corpus;
    std::string lexicon;
    std::string embeddings;
    std::string checkpoint;
    std::string out;
    std::string slice = "all";
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("invalid value for " + key + ": \"" + v + "\"");
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    if (!v.empty() && v[0] == '-') throw ConfigError(key + " must be non-negative, got " + v);
    return parse_number<std::size_t>(key, v);
}

double parse_real(const std::string& key, const std::string& v) {
    const auto x = parse_number<double>(key, v);
    if (!std::isfinite(x)) throw ConfigError(key + " must be finite");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": \"" + v + "\"");
}

using Setter = std::function<void(Settings&, const std::string&, const std::string&)>;

struct Key {
    const char* name;
    const char* help;
    Setter set;
};

const std::vector<Key>& all_keys() {
    static const std::vector<Key> keys = {
        {"seed", "top-level seed for every random choice",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.seed = parse_number<std::uint64_t>(k, v); }},
        {"out", "output path (directory for train and ablate)",
         [](Settings& s, const std::string&, const std::string& v) { s.out = v; }},
        {"n", "users per class",
         [](Settings& s, const std::string& k, const std::string& v) { s.n_per_class = parse_size(k, v); }},
        {"corpus", "corpus JSONL", [](Settings& s, const std::string&, const std::string& v) { s.corpus = v; }},
        {"lexicon", "negative-term lexicon file (default: built-in list)",
         [](Settings& s, const std::string&, const std::string& v) { s.lexicon = v; }},
        {"embeddings", "precomputed embedding file",
         [](Settings& s, const std::string&, const std::string& v) { s.embeddings = v; }},
        {"checkpoint", "checkpoint JSON",
         [](Settings& s, const std::string&, const std::string& v) { s.checkpoint = v; }},
        {"slice", "all | train | validation",
         [](Settings& s, const std::string& k, const std::string& v) {
             if (v != "all" && v != "train" && v != "validation")
                 throw ConfigError("invalid value for " + k + ": \"" + v + "\"");
             s.slice = v;
         }},
        {"threshold", "negativity threshold in [0,1]",
         [](Settings& s, const std::string& k, const std::string& v) {
             s.run.negative_threshold = parse_real(k, v);
             if (s.run.negative_threshold < 0.0 || s.run.negative_threshold > 1.0)
                 throw ConfigError("threshold must lie in [0, 1]");
         }},
        {"split_ratio", "training share of each class, in (0,1)",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.split_ratio = parse_real(k, v); }},
        {"min_freq", "minimum token frequency for the vocabulary",
         [](Settings& s, const std::string& k, const std::string& v) {
             s.run.min_freq = parse_size(k, v);
             if (s.run.min_freq < 1) throw ConfigError("min_freq must be at least 1");
         }},
        {"encoder", "toy | precomputed",
         [](Settings& s, const std::string&, const std::string& v) { s.run.model.encoder = parse_encoder_kind(v); }},
        {"max_len", "token sequence length",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.max_len = parse_size(k, v); }},
        {"d1", "token embedding width",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.d1 = parse_size(k, v); }},
        {"d2", "statistics embedding width",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.d2 = parse_size(k, v); }},
        {"d_k", "attention projection width",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.d_k = parse_size(k, v); }},
        {"refine_layers", "transformer blocks after the embedding",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.refine_layers = parse_size(k, v); }},
        {"refine_heads", "heads per transformer block",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.refine_heads = parse_size(k, v); }},
        {"mlp_hidden", "hidden width of the classifier head",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.mlp_hidden = parse_size(k, v); }},
        {"fusion", "cross_attention | concat",
         [](Settings& s, const std::string&, const std::string& v) { s.run.model.fusion = parse_fusion_mode(v); }},
        {"value_projection", "shared_with_key | separate",
         [](Settings& s, const std::string&, const std::string& v) {
             s.run.model.value_projection = parse_value_projection(v);
         }},
        {"fusion_query", "tokens | stats",
         [](Settings& s, const std::string&, const std::string& v) { s.run.model.fusion_query = parse_fusion_query(v); }},
        {"outer_relu", "clamp logits with a final ReLU (true|false)",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.model.outer_relu = parse_bool(k, v); }},
        {"lr", "Adam learning rate",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.train.learning_rate = parse_real(k, v); }},
        {"batch_size", "mini-batch size",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.train.batch_size = parse_size(k, v); }},
        {"epochs", "training epochs",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.train.epochs = parse_size(k, v); }},
        {"beta1", "Adam beta1",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.train.beta1 = parse_real(k, v); }},
        {"beta2", "Adam beta2",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.train.beta2 = parse_real(k, v); }},
        {"epsilon", "Adam epsilon",
         [](Settings& s, const std::string& k, const std::string& v) { s.run.train.epsilon = parse_real(k, v); }},
        {"shuffle_each_epoch", "reshuffle batches every epoch (true|false)",
         [](Settings& s, const std::string& k, const std::string& v) {
             s.run.train.shuffle_each_epoch = parse_bool(k, v);
         }},
        {"early_stop_patience", "epochs without improvement before stopping (0 = off)",
         [](Settings& s, const std::string& k, const std::string& v) {
             s.run.train.early_stop_patience = parse_size(k, v);
         }},
        {"record_wall_clock", "write real epoch times into the history (true|false)",
         [](Settings& s, const std::string& k, const std::string& v) {
             s.run.train.record_wall_clock = parse_bool(k, v);
         }},
    };
    return keys;
}

const Key& find_key(std::string_view name) {
    for (const Key& k : all_keys())
        if (name == k.name) return k;
    throw ConfigError("unknown setting \"" + std::string(name) + "\"");
}

const std::vector<std::string> kTrainKeys = {
    "seed",       "out",         "corpus",        "lexicon",          "embeddings",   "threshold",
    "split_ratio", "min_freq",   "encoder",       "max_len",          "d1",           "d2",
    "d_k",        "refine_layers", "refine_heads", "mlp_hidden",      "fusion",       "value_projection",
    "fusion_query", "outer_relu", "lr",           "batch_size",       "epochs",       "beta1",
    "beta2",      "epsilon",     "shuffle_each_epoch", "early_stop_patience", "record_wall_clock"};
const std::vector<std::string> kEvalKeys = {"seed",      "out",   "checkpoint", "corpus",
                                            "lexicon",   "embeddings", "slice", "split_ratio"};

std::string flag_name(const std::string& key) {
    std::string f = "--" + key;
    for (char& c : f)
        if (c == '_') c = '-';
    return f;
}

// Per-subcommand option values as raw strings; applied after the config file.
struct Command {
    CLI::App* app = nullptr;
    std::vector<std::string> keys;
    std::map<std::string, std::string> flags;
    std::string config_path;

    void bind(CLI::App* sub, std::vector<std::string> names) {
        app = sub;
        keys = std::move(names);
        sub->add_option("--config", config_path, "flat key = value settings file");
        for (const std::string& k : keys) sub->add_option(flag_name(k), flags[k], find_key(k).help);
    }

    Settings settings() const {
        Settings s;
        if (!config_path.empty()) {
            for (const auto& [k, v] : read_flat_config(config_path)) {
                if (std::find(keys.begin(), keys.end(), k) == keys.end())
                    throw ConfigError("setting \"" + k + "\" in " + config_path + " does not apply to " + app->get_name());
                find_key(k).set(s, k, v);
            }
        }
        for (const std::string& k : keys)
            if (app->count(flag_name(k)) > 0) find_key(k).set(s, k, flags.at(k));
        return s;
    }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("failed writing " + path);
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-")
        out << content;
    else
        write_file(path, content);
}

void make_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

std::vector<UserRecord> load_users(const std::string& path, std::ostream& err) {
    if (path.empty()) throw ConfigError("--corpus is required");
    ParseResult parsed = parse_corpus_file(path);
    for (const ParseIssue& i : parsed.issues) err << path << ":" << i.line << ": " << i.reason << "\n";
    if (parsed.records.empty()) throw FormatError("no valid users in " + path);
    return std::move(parsed.records);
}

LexiconScorer make_scorer(const Settings& s) {
    return s.lexicon.empty() ? LexiconScorer() : LexiconScorer(Lexicon::from_file(s.lexicon));
}

std::optional<PrecomputedEmbeddings> load_embeddings(const Settings& s, std::ostream& err) {
    if (s.embeddings.empty()) return std::nullopt;
    PrecomputedEmbeddings e = load_precomputed_file(s.embeddings);
    for (const auto& w : e.warnings) err << s.embeddings << ": " << w << "\n";
    return e;
}

std::string format6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

int cmd_gen_synth(const Settings& s, std::ostream& out) {
    if (s.n_per_class < 1) throw ConfigError("--n must be at least 1");
    if (s.out.empty()) throw ConfigError("--out is required");
    SynthDatasetSpec spec;
    spec.n_per_class = s.n_per_class;
    spec.seed = s.run.seed;
    const auto users = generate_dataset(spec);
    write_corpus_file(s.out, users);
    write_file(s.out + ".spec.json", spec_to_json(spec));
    out << "wrote " << users.size() << " users (" << s.n_per_class << " per class) to " << s.out << "\n";
    return kExitOk;
}

int cmd_featurize(const Settings& s, std::ostream& out, std::ostream& err) {
    const auto users = load_users(s.corpus, err);
    const LexiconScorer scorer = make_scorer(s);
    const auto features = parallel::extract_all(users, scorer, s.run.negative_threshold);
    std::string csv = "user_id,label";
    for (auto name : kStatFeatureNames) (csv += ',') += name;
    csv += '\n';
    for (std::size_t i = 0; i < users.size(); ++i) {
        csv += users[i].user_id;
        csv += ',';
        csv += std::to_string(static_cast<int>(users[i].label));
        for (double v : features[i].to_array()) (csv += ',') += format6(v);
        csv += '\n';
    }
    emit(s.out, csv, out);
    if (!s.out.empty() && s.out != "-") out << "wrote features for " << users.size() << " users to " << s.out << "\n";
    return kExitOk;
}

void write_run(const std::string& dir, const ExperimentResult& r) {
    make_dir(dir);
    save_checkpoint(r.trained.model, join(dir, "checkpoint.json"));
    write_file(join(dir, "history.csv"), history_to_csv(r.trained.history));
    write_file(join(dir, "metrics.json"), metrics_to_json(r.validation));
}

std::string summary(const ExperimentResult& r) {
    const MetricsReport& m = r.validation;
    return "train " + std::to_string(r.n_train) + " / validation " + std::to_string(r.n_validation) + ", " +
           std::to_string(r.trained.history.epochs.size()) + " epochs: accuracy " + format6(m.accuracy) +
           " precision " + format6(m.precision) + " recall " + format6(m.recall) + " f1 " + format6(m.f1);
}

int cmd_train(const Settings& s, std::ostream& out, std::ostream& err) {
    const auto users = load_users(s.corpus, err);
    const LexiconScorer scorer = make_scorer(s);
    const auto embeddings = load_embeddings(s, err);
    const std::string dir = s.out.empty() ? "run" : s.out;
    const ExperimentResult r = run_experiment(users, s.run, scorer, embeddings ? &*embeddings : nullptr);
    write_run(dir, r);
    out << summary(r) << "\n" << "wrote " << dir << "/checkpoint.json, history.csv, metrics.json\n";
    return kExitOk;
}

int cmd_ablate(const Settings& s, std::ostream& out, std::ostream& err) {
    const auto users = load_users(s.corpus, err);
    const LexiconScorer scorer = make_scorer(s);
    const auto embeddings = load_embeddings(s, err);
    const std::string dir = s.out.empty() ? "ablation" : s.out;
    const auto entries = run_ablation(users, s.run, scorer, embeddings ? &*embeddings : nullptr);
    std::string table = "variant,fusion,refine_layers,accuracy,precision,recall,f1\n";
    for (const AblationEntry& e : entries) {
        write_run(join(dir, e.name.c_str()), e.result);
        const MetricsReport& m = e.result.validation;
        table += e.name + "," + std::string(to_string(e.fusion)) + "," + std::to_string(e.refine_layers) + "," +
                 format6(m.accuracy) + "," + format6(m.precision) + "," + format6(m.recall) + "," + format6(m.f1) +
                 "\n";
        out << e.name << ": " << summary(e.result) << "\n";
    }
    write_file(join(dir, "ablation.csv"), table);
    out << "wrote " << dir << "/ablation.csv\n";
    return kExitOk;
}

struct Scored {
    FusionModel model;
    std::vector<Example> examples;
};

Scored load_for_inference(const Settings& s, std::ostream& err) {
    if (s.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    FusionModel model = load_checkpoint(s.checkpoint);
    auto users = load_users(s.corpus, err);
    if (s.slice != "all") {
        Split split = split_dataset(users, SplitSpec{s.run.split_ratio, s.run.seed});
        users = s.slice == "train" ? std::move(split.train) : std::move(split.validation);
        if (users.empty()) throw ConfigError("the " + s.slice + " slice is empty");
    }
    if (model.config().encoder == EncoderKind::toy) {
        const double coverage = vocab_coverage(model.vocab, users);
        if (coverage < kMinVocabCoverage)
            throw ConfigError("corpus does not match the checkpoint vocabulary (only " + format6(coverage) +
                              " of tokens known)");
    }
    const LexiconScorer scorer = make_scorer(s);
    const auto features = parallel::extract_all(users, scorer, model.negative_threshold);
    const auto embeddings = load_embeddings(s, err);
    auto examples = make_examples(model, users, features, embeddings ? &*embeddings : nullptr);
    return {std::move(model), std::move(examples)};
}

int cmd_eval(const Settings& s, std::ostream& out, std::ostream& err) {
    const Scored d = load_for_inference(s, err);
    emit(s.out, metrics_to_json(evaluate(d.model, d.examples)), out);
    return kExitOk;
}

int cmd_predict(const Settings& s, std::ostream& out, std::ostream& err) {
    const Scored d = load_for_inference(s, err);
    const Matrix logits = predict_logits(d.model, d.examples);
    std::string csv = "user_id,prob_depressed,prediction\n";
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
        const auto row = logits.row(i);
        csv += d.examples[i].user_id + "," + format6(prob_depressed(row)) + "," +
               std::to_string(predicted_class(row)) + "\n";
    }
    emit(s.out, csv, out);
    return kExitOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
    if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const FeatureError*>(&e)) return kExitData;
    return kExitUsage;
}

std::map<std::string, std::string> read_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        std::string body = line;
        bool quoted = false;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '"') quoted = !quoted;
            if (body[i] == '#' && !quoted) {
                body.resize(i);
                break;
            }
        }
        body = trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected key = value");
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(n) + ": empty key");
        if (!out.emplace(key, value).second) throw ConfigError(path + ":" + std::to_string(n) + ": duplicate key " + key);
    }
    return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Depression screening from user timelines: features, fusion model, training, evaluation"};
    app.name("mffnc");
    app.require_subcommand(1);

    Command gen, feat, trn, abl, ev, pred;
    gen.bind(app.add_subcommand("gen-synth", "write a synthetic labelled corpus"), {"n", "seed", "out"});
    feat.bind(app.add_subcommand("featurize", "six behavioural statistics per user as CSV"),
              {"corpus", "lexicon", "threshold", "seed", "out"});
    trn.bind(app.add_subcommand("train", "split, train and evaluate; writes checkpoint, history and metrics"),
             kTrainKeys);
    abl.bind(app.add_subcommand("ablate", "train the fusion x refinement variants with one config"), kTrainKeys);
    ev.bind(app.add_subcommand("eval", "metrics of a checkpoint on a corpus"), kEvalKeys);
    pred.bind(app.add_subcommand("predict", "per-user probabilities and predictions"), kEvalKeys);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help requests exit 0; everything else is a usage error.
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen.app->parsed()) return cmd_gen_synth(gen.settings(), out);
        if (feat.app->parsed()) return cmd_featurize(feat.settings(), out, err);
        if (trn.app->parsed()) return cmd_train(trn.settings(), out, err);
        if (abl.app->parsed()) return cmd_ablate(abl.settings(), out, err);
        if (ev.app->parsed()) return cmd_eval(ev.settings(), out, err);
        if (pred.app->parsed()) return cmd_predict(pred.settings(), out, err);
    } catch (const Error& e) {
        err << "mffnc: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::bad_alloc&) {
        err << "mffnc: out of memory\n";
        return 1;
    }
    return kExitUsage;
}

}  // namespace mffnc
