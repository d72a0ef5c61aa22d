#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mffnc/features.hpp"
#include "mffnc/matrix.hpp"
#include "mffnc/tensor.hpp"
#include "mffnc/text.hpp"

namespace mffnc {

enum class FusionMode { cross_attention, concat };
enum class ValueProjection { shared_with_key, separate };
enum class FusionQuery { tokens, stats };
enum class EncoderKind { toy, precomputed };

std::string_view to_string(FusionMode m);
std::string_view to_string(ValueProjection v);
std::string_view to_string(FusionQuery q);
std::string_view to_string(EncoderKind e);
// Inverse of to_string; throw ConfigError on unknown names.
FusionMode parse_fusion_mode(std::string_view s);
ValueProjection parse_value_projection(std::string_view s);
FusionQuery parse_fusion_query(std::string_view s);
EncoderKind parse_encoder_kind(std::string_view s);

struct ModelConfig {
    EncoderKind encoder = EncoderKind::toy;
    std::size_t vocab_size = 0;  // toy encoder only
    std::size_t max_len = 256;   // toy encoder only
    std::size_t d1 = 32;         // token embedding width
    std::size_t d2 = 32;         // statistical embedding width
    std::size_t d_k = 32;        // cross-attention projection width
    std::size_t refine_layers = 0;
    std::size_t refine_heads = 4;
    std::size_t mlp_hidden = 32;
    FusionMode fusion = FusionMode::cross_attention;
    ValueProjection value_projection = ValueProjection::shared_with_key;
    bool outer_relu = false;
    FusionQuery fusion_query = FusionQuery::tokens;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws ConfigError naming the first violated constraint.
void validate(const ModelConfig& config);
// Width of the fused vector fed to the MLP head.
std::size_t fused_width(const ModelConfig& config);

// Scaled dot-product attention with queries from x1 and keys/values from x2.
// value may alias key (shared projection).
struct CrossAttentionLayer {
    Tensor w_q;  // query_width x d_k
    Tensor w_k;  // kv_width x d_k
    Tensor w_v;  // kv_width x d_k
};

struct AttentionResult {
    Tensor output;   // m x d_k
    Tensor weights;  // m x p, rows sum to 1
};

// Q = x1 W_Q, K = x2 W_K, V = x2 W_V, A = softmax_rows(Q K^T / sqrt(d_k)),
// output = A V.
AttentionResult cross_attention(const CrossAttentionLayer& layer, const Tensor& x1, const Tensor& x2);

// Two linear layers with ReLU between. outer_relu additionally clamps the
// logits.
struct MlpHead {
    Tensor w1;  // d_in x hidden
    Tensor b1;  // 1 x hidden
    Tensor w2;  // hidden x 2
    Tensor b2;  // 1 x 2
};

Tensor mlp_forward(const MlpHead& head, const Tensor& x, bool outer_relu);

// Post-norm transformer encoder block.
struct RefineBlock {
    Tensor wq, wk, wv, wo;         // d1 x d1
    Tensor ln1_gamma, ln1_beta;    // 1 x d1
    Tensor ff_w1, ff_b1;           // d1 x 4d1, 1 x 4d1
    Tensor ff_w2, ff_b2;           // 4d1 x d1, 1 x d1
    Tensor ln2_gamma, ln2_beta;    // 1 x d1
};

Tensor refine_block_forward(const RefineBlock& block, const Tensor& x, std::size_t heads);

struct NamedParameter {
    std::string name;
    Tensor tensor;
};

// One user as seen by the network: token ids (toy encoder) or an external
// embedding matrix (precomputed encoder), plus normalized statistics.
struct ModelInput {
    std::variant<TokenSequence, Matrix> text;
    std::array<double, kNumStatFeatures> stats{};
};

class FusionModel {
public:
    // Glorot-uniform weights, zero biases, unit layer-norm gains, N(0, 0.02)
    // embedding and positional rows. Deterministic for a fixed seed.
    static FusionModel init(const ModelConfig& config, std::uint64_t seed);
    // All parameters zero (layer-norm gains too); used when loading.
    static FusionModel zeros(const ModelConfig& config);

    FusionModel(FusionModel&&) noexcept = default;
    FusionModel& operator=(FusionModel&&) noexcept = default;
    FusionModel(const FusionModel&) = delete;
    FusionModel& operator=(const FusionModel&) = delete;

    // Deep copy; the clone shares no tensors with this model.
    FusionModel clone() const;

    const ModelConfig& config() const { return config_; }
    std::span<const NamedParameter> parameters() const { return params_; }
    std::size_t parameter_count() const;
    const Tensor& parameter(std::string_view name) const;
    Tensor& parameter(std::string_view name);
    void zero_grad();

    // Present only for the toy encoder.
    const Tensor& embedding() const { return embedding_; }
    const Tensor& positional() const { return positional_; }
    const std::vector<RefineBlock>& refine_blocks() const { return refine_; }
    const Tensor& stat_scale() const { return stat_scale_; }  // 6 x d2, rows a_j
    const Tensor& stat_bias() const { return stat_bias_; }    // 6 x d2, rows c_j
    const CrossAttentionLayer& attention() const { return attention_; }
    const MlpHead& head() const { return head_; }

    // Carried alongside the weights so a checkpoint is self-contained.
    Vocab vocab;
    FeatureNormalizer normalizer;
    double negative_threshold = kDefaultNegativeThreshold;

private:
    explicit FusionModel(const ModelConfig& config);
    Tensor add_param(std::string name, std::size_t rows, std::size_t cols);

    ModelConfig config_;
    std::vector<NamedParameter> params_;
    Tensor embedding_, positional_;
    std::vector<RefineBlock> refine_;
    Tensor stat_scale_, stat_bias_;
    CrossAttentionLayer attention_;
    MlpHead head_;
};

// Rows of the token matrix actually used downstream: embedding plus
// positional rows for the first true_len ids (the CLS row alone when
// true_len is 0), then the refinement blocks.
Tensor encode_tokens(const FusionModel& model, const TokenSequence& sequence);
Tensor encode_embedded(const FusionModel& model, const Matrix& embedded);
// Row j = stats[j] * a_j + c_j.
Tensor encode_stats(const FusionModel& model, std::span<const double, kNumStatFeatures> stats);

// 1 x fused_width(config) vector for one user.
Tensor fuse(const FusionModel& model, const ModelInput& input);
// B x 2 logits.
Tensor forward(const FusionModel& model, std::span<const ModelInput> batch);

// Versioned JSON checkpoint with config, vocab, normalizer and parameters.
// Doubles are written in shortest round-trip form, so load(save(m)) is exact.
std::string checkpoint_to_string(const FusionModel& model);
FusionModel checkpoint_from_string(std::string_view text);
void save_checkpoint(const FusionModel& model, const std::string& path);
// Throws IoError when the file is missing, FormatError on malformed content,
// version mismatch or parameter shapes inconsistent with the stored config.
FusionModel load_checkpoint(const std::string& path);

}  // namespace mffnc
