#include "mffnc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mffnc/error.hpp"
#include "mffnc/rng.hpp"

namespace mffnc {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kEmbeddingStd = 0.02;

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& values, const char* what) {
    for (E v : values)
        if (to_string(v) == s) return v;
    throw ConfigError(std::string("unknown ") + what + ": \"" + std::string(s) + "\"");
}

bool is_bias_name(std::string_view name) {
    return name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with("_beta") || name == "stat.bias";
}

}  // namespace

std::string_view to_string(FusionMode m) { return m == FusionMode::concat ? "concat" : "cross_attention"; }
std::string_view to_string(ValueProjection v) {
    return v == ValueProjection::separate ? "separate" : "shared_with_key";
}
std::string_view to_string(FusionQuery q) { return q == FusionQuery::stats ? "stats" : "tokens"; }
std::string_view to_string(EncoderKind e) { return e == EncoderKind::precomputed ? "precomputed" : "toy"; }

FusionMode parse_fusion_mode(std::string_view s) {
    return parse_enum(s, std::array{FusionMode::cross_attention, FusionMode::concat}, "fusion mode");
}
ValueProjection parse_value_projection(std::string_view s) {
    return parse_enum(s, std::array{ValueProjection::shared_with_key, ValueProjection::separate},
                      "value projection");
}
FusionQuery parse_fusion_query(std::string_view s) {
    return parse_enum(s, std::array{FusionQuery::tokens, FusionQuery::stats}, "fusion query");
}
EncoderKind parse_encoder_kind(std::string_view s) {
    return parse_enum(s, std::array{EncoderKind::toy, EncoderKind::precomputed}, "encoder");
}

void validate(const ModelConfig& c) {
    if (c.d1 == 0 || c.d2 == 0) throw ConfigError("d1 and d2 must be positive");
    if (c.d_k == 0) throw ConfigError("d_k must be at least 1");
    if (c.mlp_hidden == 0) throw ConfigError("mlp_hidden must be positive");
    if (c.encoder == EncoderKind::toy) {
        if (c.vocab_size < Vocab::kNumSpecials)
            throw ConfigError("vocab_size must include the 4 special tokens, got " + std::to_string(c.vocab_size));
        if (c.max_len < 1) throw ConfigError("max_len must be positive");
    }
    if (c.refine_layers > 0) {
        if (c.refine_heads == 0) throw ConfigError("refine_heads must be positive");
        if (c.d1 % c.refine_heads != 0)
            throw ConfigError("refine_heads (" + std::to_string(c.refine_heads) + ") must divide d1 (" +
                              std::to_string(c.d1) + ")");
    }
}

std::size_t fused_width(const ModelConfig& c) {
    if (c.fusion == FusionMode::concat) return c.d1 + c.d2;
    return c.fusion_query == FusionQuery::tokens ? c.d_k : kNumStatFeatures * c.d_k;
}

FusionModel::FusionModel(const ModelConfig& config) : config_(config) {
    validate(config_);
    const std::size_t d1 = config_.d1;
    const std::size_t d2 = config_.d2;
    if (config_.encoder == EncoderKind::toy) {
        embedding_ = add_param("embedding", config_.vocab_size, d1);
        positional_ = add_param("positional", config_.max_len, d1);
    }
    for (std::size_t l = 0; l < config_.refine_layers; ++l) {
        const std::string p = "refine." + std::to_string(l) + ".";
        RefineBlock b;
        b.wq = add_param(p + "wq", d1, d1);
        b.wk = add_param(p + "wk", d1, d1);
        b.wv = add_param(p + "wv", d1, d1);
        b.wo = add_param(p + "wo", d1, d1);
        b.ln1_gamma = add_param(p + "ln1_gamma", 1, d1);
        b.ln1_beta = add_param(p + "ln1_beta", 1, d1);
        b.ff_w1 = add_param(p + "ff.w1", d1, 4 * d1);
        b.ff_b1 = add_param(p + "ff.b1", 1, 4 * d1);
        b.ff_w2 = add_param(p + "ff.w2", 4 * d1, d1);
        b.ff_b2 = add_param(p + "ff.b2", 1, d1);
        b.ln2_gamma = add_param(p + "ln2_gamma", 1, d1);
        b.ln2_beta = add_param(p + "ln2_beta", 1, d1);
        refine_.push_back(std::move(b));
    }
    stat_scale_ = add_param("stat.scale", kNumStatFeatures, d2);
    stat_bias_ = add_param("stat.bias", kNumStatFeatures, d2);
    if (config_.fusion == FusionMode::cross_attention) {
        const bool tokens_query = config_.fusion_query == FusionQuery::tokens;
        const std::size_t q_width = tokens_query ? d1 : d2;
        const std::size_t kv_width = tokens_query ? d2 : d1;
        attention_.w_q = add_param("xattn.wq", q_width, config_.d_k);
        attention_.w_k = add_param("xattn.wk", kv_width, config_.d_k);
        attention_.w_v = config_.value_projection == ValueProjection::separate
                             ? add_param("xattn.wv", kv_width, config_.d_k)
                             : attention_.w_k;
    }
    head_.w1 = add_param("mlp.w1", fused_width(config_), config_.mlp_hidden);
    head_.b1 = add_param("mlp.b1", 1, config_.mlp_hidden);
    head_.w2 = add_param("mlp.w2", config_.mlp_hidden, 2);
    head_.b2 = add_param("mlp.b2", 1, 2);
}

Tensor FusionModel::add_param(std::string name, std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::parameter(Matrix(rows, cols));
    params_.push_back({std::move(name), t});
    return t;
}

FusionModel FusionModel::zeros(const ModelConfig& config) { return FusionModel(config); }

FusionModel FusionModel::init(const ModelConfig& config, std::uint64_t seed) {
    FusionModel model(config);
    Rng rng(seed);
    for (NamedParameter& p : model.params_) {
        Matrix& m = p.tensor.mutable_value();
        const std::string_view name = p.name;
        if (name == "embedding" || name == "positional") {
            for (double& v : m.data) v = rng.normal(0.0, kEmbeddingStd);
        } else if (name.ends_with("_gamma")) {
            std::fill(m.data.begin(), m.data.end(), 1.0);
        } else if (is_bias_name(name)) {
            std::fill(m.data.begin(), m.data.end(), 0.0);
        } else {
            // Each statistic has its own scalar -> d2 map, so fan_in is 1.
            const double fan_in = name == "stat.scale" ? 1.0 : static_cast<double>(m.rows);
            const double limit = std::sqrt(6.0 / (fan_in + static_cast<double>(m.cols)));
            for (double& v : m.data) v = rng.uniform(-limit, limit);
        }
    }
    return model;
}

FusionModel FusionModel::clone() const {
    FusionModel copy(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) copy.params_[i].tensor.mutable_value() = params_[i].tensor.value();
    copy.vocab = vocab;
    copy.normalizer = normalizer;
    copy.negative_threshold = negative_threshold;
    return copy;
}

std::size_t FusionModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.value().size();
    return n;
}

const Tensor& FusionModel::parameter(std::string_view name) const {
    for (const auto& p : params_)
        if (p.name == name) return p.tensor;
    throw UsageError("no parameter named " + std::string(name));
}

Tensor& FusionModel::parameter(std::string_view name) {
    for (auto& p : params_)
        if (p.name == name) return p.tensor;
    throw UsageError("no parameter named " + std::string(name));
}

void FusionModel::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

AttentionResult cross_attention(const CrossAttentionLayer& layer, const Tensor& x1, const Tensor& x2) {
    const Tensor q = matmul(x1, layer.w_q);
    const Tensor k = matmul(x2, layer.w_k);
    const Tensor v = layer.w_v.same_node(layer.w_k) ? k : matmul(x2, layer.w_v);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(layer.w_q.cols()));
    Tensor weights = softmax_rows(scale(matmul_nt(q, k), inv_sqrt_dk));
    Tensor output = matmul(weights, v);
    return {std::move(output), std::move(weights)};
}

Tensor mlp_forward(const MlpHead& head, const Tensor& x, bool outer_relu) {
    const Tensor hidden = relu(add(matmul(x, head.w1), head.b1));
    Tensor logits = add(matmul(hidden, head.w2), head.b2);
    return outer_relu ? relu(logits) : logits;
}

Tensor refine_block_forward(const RefineBlock& b, const Tensor& x, std::size_t heads) {
    const std::size_t width = x.cols();
    const std::size_t head_width = width / heads;
    const Tensor q = matmul(x, b.wq);
    const Tensor k = matmul(x, b.wk);
    const Tensor v = matmul(x, b.wv);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));
    Tensor merged;
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * head_width;
        const Tensor qh = slice_cols(q, off, head_width);
        const Tensor kh = slice_cols(k, off, head_width);
        const Tensor vh = slice_cols(v, off, head_width);
        const Tensor out = matmul(softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt)), vh);
        merged = merged.defined() ? concat_cols(merged, out) : out;
    }
    const Tensor attn = matmul(merged, b.wo);
    const Tensor x1 =
        add(mul(normalize_rows(add(x, attn), kLayerNormEps), b.ln1_gamma), b.ln1_beta);
    const Tensor ff = add(matmul(relu(add(matmul(x1, b.ff_w1), b.ff_b1)), b.ff_w2), b.ff_b2);
    return add(mul(normalize_rows(add(x1, ff), kLayerNormEps), b.ln2_gamma), b.ln2_beta);
}

namespace {

Tensor refine(const FusionModel& model, Tensor x) {
    for (const RefineBlock& b : model.refine_blocks()) x = refine_block_forward(b, x, model.config().refine_heads);
    return x;
}

}  // namespace

Tensor encode_tokens(const FusionModel& model, const TokenSequence& sequence) {
    const ModelConfig& c = model.config();
    if (c.encoder != EncoderKind::toy) throw UsageError("encode_tokens requires the toy encoder");
    if (sequence.true_len > sequence.ids.size())
        throw UsageError("true_len exceeds the number of ids in the sequence");
    const std::size_t used = std::max<std::size_t>(sequence.true_len, 1);
    if (used > c.max_len)
        throw UsageError("sequence of length " + std::to_string(used) + " exceeds max_len " + std::to_string(c.max_len));
    std::vector<std::size_t> ids;
    if (sequence.true_len == 0)
        ids.push_back(Vocab::kCls);
    else
        ids.assign(sequence.ids.begin(), sequence.ids.begin() + static_cast<std::ptrdiff_t>(used));
    const Tensor tokens = gather_rows(model.embedding(), ids);
    return refine(model, add(tokens, slice_rows(model.positional(), 0, used)));
}

Tensor encode_embedded(const FusionModel& model, const Matrix& embedded) {
    const ModelConfig& c = model.config();
    if (c.encoder != EncoderKind::precomputed) throw UsageError("encode_embedded requires the precomputed encoder");
    if (embedded.cols != c.d1 || embedded.rows == 0)
        throw DimensionError("precomputed embedding " + embedded.shape_string() + " does not match d1=" +
                             std::to_string(c.d1));
    return refine(model, Tensor::constant(embedded));
}

Tensor encode_stats(const FusionModel& model, std::span<const double, kNumStatFeatures> stats) {
    Matrix column(kNumStatFeatures, 1, std::vector<double>(stats.begin(), stats.end()));
    return add(mul_col(model.stat_scale(), Tensor::constant(std::move(column))), model.stat_bias());
}

Tensor fuse(const FusionModel& model, const ModelInput& input) {
    const ModelConfig& c = model.config();
    const Tensor tokens = std::holds_alternative<TokenSequence>(input.text)
                              ? encode_tokens(model, std::get<TokenSequence>(input.text))
                              : encode_embedded(model, std::get<Matrix>(input.text));
    const Tensor stats = encode_stats(model, input.stats);
    if (c.fusion == FusionMode::concat) return concat_cols(mean_rows(tokens), mean_rows(stats));
    if (c.fusion_query == FusionQuery::tokens) return mean_rows(cross_attention(model.attention(), tokens, stats).output);
    const Tensor out = cross_attention(model.attention(), stats, tokens).output;
    return reshape(out, 1, out.rows() * out.cols());
}

Tensor forward(const FusionModel& model, std::span<const ModelInput> batch) {
    if (batch.empty()) throw UsageError("forward on an empty batch");
    std::vector<Tensor> rows;
    rows.reserve(batch.size());
    for (const ModelInput& in : batch) rows.push_back(fuse(model, in));
    const Tensor fused = rows.size() == 1 ? rows.front() : concat_rows(rows);
    return mlp_forward(model.head(), fused, model.config().outer_relu);
}

namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr int kCheckpointVersion = 1;

ordered_json config_json(const ModelConfig& c) {
    ordered_json j;
    j["encoder"] = to_string(c.encoder);
    j["vocab_size"] = c.vocab_size;
    j["max_len"] = c.max_len;
    j["d1"] = c.d1;
    j["d2"] = c.d2;
    j["d_k"] = c.d_k;
    j["refine_layers"] = c.refine_layers;
    j["refine_heads"] = c.refine_heads;
    j["mlp_hidden"] = c.mlp_hidden;
    j["fusion"] = to_string(c.fusion);
    j["value_projection"] = to_string(c.value_projection);
    j["outer_relu"] = c.outer_relu;
    j["fusion_query"] = to_string(c.fusion_query);
    return j;
}

const json& member(const json& obj, const char* key) {
    if (!obj.is_object()) throw FormatError(std::string("checkpoint: expected an object around \"") + key + "\"");
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(std::string("checkpoint: missing field \"") + key + "\"");
    return *it;
}

std::size_t size_field(const json& obj, const char* key) {
    const json& v = member(obj, key);
    if (!v.is_number_unsigned()) throw FormatError(std::string("checkpoint: \"") + key + "\" must be a non-negative integer");
    return v.get<std::size_t>();
}

std::string string_field(const json& obj, const char* key) {
    const json& v = member(obj, key);
    if (!v.is_string()) throw FormatError(std::string("checkpoint: \"") + key + "\" must be a string");
    return v.get<std::string>();
}

double number(const json& v, const char* what) {
    if (!v.is_number()) throw FormatError(std::string("checkpoint: non-numeric value in ") + what);
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw FormatError(std::string("checkpoint: non-finite value in ") + what);
    return x;
}

std::array<double, kNumStatFeatures> six(const json& v, const char* what) {
    if (!v.is_array() || v.size() != kNumStatFeatures)
        throw FormatError(std::string("checkpoint: ") + what + " must hold 6 numbers");
    std::array<double, kNumStatFeatures> out{};
    for (std::size_t i = 0; i < kNumStatFeatures; ++i) out[i] = number(v[i], what);
    return out;
}

ModelConfig parse_config(const json& j) {
    ModelConfig c;
    try {
        c.encoder = parse_encoder_kind(string_field(j, "encoder"));
        c.fusion = parse_fusion_mode(string_field(j, "fusion"));
        c.value_projection = parse_value_projection(string_field(j, "value_projection"));
        c.fusion_query = parse_fusion_query(string_field(j, "fusion_query"));
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    c.vocab_size = size_field(j, "vocab_size");
    c.max_len = size_field(j, "max_len");
    c.d1 = size_field(j, "d1");
    c.d2 = size_field(j, "d2");
    c.d_k = size_field(j, "d_k");
    c.refine_layers = size_field(j, "refine_layers");
    c.refine_heads = size_field(j, "refine_heads");
    c.mlp_hidden = size_field(j, "mlp_hidden");
    const json& relu = member(j, "outer_relu");
    if (!relu.is_boolean()) throw FormatError("checkpoint: \"outer_relu\" must be a boolean");
    c.outer_relu = relu.get<bool>();
    try {
        validate(c);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
    }
    return c;
}

}  // namespace

std::string checkpoint_to_string(const FusionModel& model) {
    ordered_json j;
    j["version"] = kCheckpointVersion;
    j["config"] = config_json(model.config());
    j["vocab"] = ordered_json{{"min_freq", model.vocab.min_freq()}, {"tokens", model.vocab.tokens()}};
    j["vocab_hash"] = model.vocab.hash();
    j["normalizer"] = ordered_json{{"mean", model.normalizer.mean}, {"std", model.normalizer.std}};
    j["features"] = ordered_json{{"threshold", model.negative_threshold}};
    ordered_json params = ordered_json::object();
    for (const NamedParameter& p : model.parameters()) {
        const Matrix& m = p.tensor.value();
        params[p.name] = ordered_json{{"shape", {m.rows, m.cols}}, {"data", m.data}};
    }
    j["params"] = std::move(params);
    return j.dump() + "\n";
}

FusionModel checkpoint_from_string(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint is not valid JSON (truncated?): ") + e.what());
    }
    const json& version = member(j, "version");
    if (!version.is_number_integer() || version.get<long long>() != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + version.dump() + ", expected " +
                          std::to_string(kCheckpointVersion));

    FusionModel model = FusionModel::zeros(parse_config(member(j, "config")));

    const json& vocab = member(j, "vocab");
    const json& tokens = member(vocab, "tokens");
    if (!tokens.is_array()) throw FormatError("checkpoint: vocab tokens must be an array");
    std::vector<std::string> token_list;
    token_list.reserve(tokens.size());
    for (const json& t : tokens) {
        if (!t.is_string()) throw FormatError("checkpoint: vocab tokens must be strings");
        token_list.push_back(t.get<std::string>());
    }
    model.vocab = Vocab::from_tokens(std::move(token_list), size_field(vocab, "min_freq"));
    if (auto it = j.find("vocab_hash"); it != j.end()) {
        if (!it->is_number_unsigned() || it->get<std::uint64_t>() != model.vocab.hash())
            throw FormatError("checkpoint: vocab_hash does not match the stored vocabulary");
    }

    const json& norm = member(j, "normalizer");
    model.normalizer.mean = six(member(norm, "mean"), "normalizer mean");
    model.normalizer.std = six(member(norm, "std"), "normalizer std");
    if (auto it = j.find("features"); it != j.end()) {
        model.negative_threshold = number(member(*it, "threshold"), "features threshold");
        if (model.negative_threshold < 0.0 || model.negative_threshold > 1.0)
            throw FormatError("checkpoint: negativity threshold outside [0, 1]");
    }

    const json& params = member(j, "params");
    if (!params.is_object()) throw FormatError("checkpoint: params must be an object");
    std::set<std::string> expected;
    for (const NamedParameter& p : model.parameters()) expected.insert(p.name);
    for (const auto& [name, _] : params.items())
        if (!expected.contains(name))
            throw FormatError("checkpoint: unexpected parameter \"" + name + "\" for the stored config");
    for (const NamedParameter& p : model.parameters()) {
        auto it = params.find(p.name);
        if (it == params.end()) throw FormatError("checkpoint: missing parameter \"" + p.name + "\"");
        const json& shape = member(*it, "shape");
        const json& data = member(*it, "data");
        Matrix& m = model.parameter(p.name).mutable_value();
        if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() || !shape[1].is_number_unsigned())
            throw FormatError("checkpoint: parameter \"" + p.name + "\" has a malformed shape");
        const auto r = shape[0].get<std::size_t>();
        const auto c = shape[1].get<std::size_t>();
        if (r != m.rows || c != m.cols)
            throw FormatError("checkpoint: parameter \"" + p.name + "\" has shape " + std::to_string(r) + "x" +
                              std::to_string(c) + " but the config requires " + m.shape_string());
        if (!data.is_array() || data.size() != m.size())
            throw FormatError("checkpoint: parameter \"" + p.name + "\" has " + std::to_string(data.size()) +
                              " values, expected " + std::to_string(m.size()));
        for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = number(data[i], p.name.c_str());
    }
    return model;
}

void save_checkpoint(const FusionModel& model, const std::string& path) {
    const std::string text = checkpoint_to_string(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

FusionModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed reading checkpoint " + path);
    return checkpoint_from_string(buf.str());
}

}  // namespace mffnc
