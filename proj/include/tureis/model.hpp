#pragma once
#include <array>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tureis/encoding.hpp"
#include "tureis/rng.hpp"
#include "tureis/schema.hpp"
#include "tureis/tensor.hpp"

namespace tureis {

constexpr int kEmbedDim = 64;  // d = heads x head width
constexpr int kNumLayers = 2;
constexpr int kNumHeads = 4;
constexpr int kHeadWidth = 16;
constexpr double kProbClamp = 1e-7;  // clamp for all log terms
constexpr double kLnEps = 1e-12;

struct EncoderLayerParams {
    Mat wq, wk, wv, wo;        // d x d, four heads of width 16 side by side
    Vec ln1_gain, ln1_bias;    // d
    Mat w1;  Vec b1;           // 2d x d, 2d
    Mat w2;  Vec b2;           // d x 2d, d
    Vec ln2_gain, ln2_bias;    // d
};

// The canonical architecture is fixed (d=64, 2 layers, 4 heads of width 16);
// reduced widths exist only so the exhaustive finite-difference sweep can run
// through the identical code paths at tractable cost.
struct ModelDims {
    int embed_dim = kEmbedDim;
    int num_layers = kNumLayers;
    int num_heads = kNumHeads;
    int head_width() const { return embed_dim / num_heads; }
};

// Every learnable tensor of the encoder. Also reused as the gradient /
// Adam-moment container (identical shape family).
struct ModelParams {
    int bit_dim = 0;  // fused feature width D
    ModelDims dims;

    Mat w_in;  Vec b_in;   // d x D, d
    Mat pos;               // L x d positional vectors
    double mask_value = 0.0;  // learnable input-level [MASK] fill
    std::vector<EncoderLayerParams> layers;
    Mat w_out;  Vec b_out;  // D x d, D

    static ModelParams shaped(int bit_dim, ModelDims dims = {});
    std::size_t param_count() const;
};

struct TensorRef {
    std::string name;
    double* data;
    std::size_t n;
};

// Tensors in declaration order; drives init, Adam, serialization and the
// finite-difference sweep.
std::vector<TensorRef> tensor_refs(ModelParams& p);

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int epochs = 30;
    int batch_size = 64;
    double p_mask = 0.15;      // per-sensor masking probability
    double focal_gamma = 2.0;
    double dropout_rate = 0.1;
    uint64_t seed = 0;
};

using MaskSet = std::set<int>;  // sensor indices masked for a sequence

ModelParams init_params(const HomeSchema& schema, uint64_t seed, ModelDims dims = {});

// Window bits as reals, with every bit position of each masked sensor set to
// mask_value in all L rows. Shared by training and runtime isolation.
Mat apply_mask(const SequenceWindow& window, const MaskSet& mask,
               const ModelParams& params, const HomeSchema& schema);
void apply_mask_inplace(Mat& input, const MaskSet& mask, const ModelParams& params,
                        const HomeSchema& schema);

struct LayerCache {
    Mat input;                 // L x d
    Mat q, k, v;               // L x d
    std::vector<Mat> attn;     // L x L softmax weights per head
    Mat attn_concat;           // L x d
    Mat attn_out;              // L x d (after W_O)
    Mat drop1;                 // dropout multipliers (0 or 1/(1-p))
    Mat ln1_xhat;  Vec ln1_inv_std;
    Mat ln1_out;
    Mat ffn_z1;                // L x 2d pre-GELU
    Mat ffn_g;                 // L x 2d post-GELU
    Mat ffn_out;               // L x d
    Mat drop2;
    Mat ln2_xhat;  Vec ln2_inv_std;
    Mat ln2_out;
};

struct ForwardCache {
    Mat input;   // L x D (post-masking reals)
    Mat tokens;  // L x d
    std::vector<LayerCache> layers;
    Mat logits;  // L x D
};

// dropout_rng == nullptr turns dropout off (inference / gradient checks).
Mat forward(const ModelParams& params, const Mat& input, ForwardCache* cache,
            double dropout_rate = 0.0, Rng* dropout_rng = nullptr);

struct FocalResult {
    double loss = 0.0;
    Mat dlogits;  // L x D, zero at unmasked positions
};

// Mean focal loss over masked positions only; masked_positions is an L x D
// 0/1 matrix. Probabilities are clamped to [1e-7, 1-1e-7].
FocalResult focal_loss(const Mat& logits, const Mat& target_bits,
                       const Mat& masked_positions, double gamma);

struct BackwardResult {
    ModelParams grads;  // same shape family as ModelParams
    Mat dinput;         // L x D; feeds the mask_value gradient
};

BackwardResult backward(const ModelParams& params, const ForwardCache& cache,
                        const Mat& dlogits);

struct AdamState {
    ModelParams m, v;
    explicit AdamState(int bit_dim, ModelDims dims = {})
        : m(ModelParams::shaped(bit_dim, dims)), v(ModelParams::shaped(bit_dim, dims)) {}
};

void adam_step(ModelParams& params, ModelParams& grads, AdamState& state,
               const TrainConfig& config, int t);

struct TrainResult {
    ModelParams params;
    std::vector<double> epoch_loss;
};

TrainResult train(const std::vector<SequenceWindow>& windows, const HomeSchema& schema,
                  const TrainConfig& config);

// Checkpoint: "TURS", u16 version, length-prefixed JSON header (schema, L, d,
// layers, heads, stats), then tensors in declaration order as f32 LE.
std::string save_checkpoint(const ModelParams& params, const HomeSchema& schema,
                            const StatsMap& stats);
struct Checkpoint {
    ModelParams params;
    HomeSchema schema;
    StatsMap stats;
};
Checkpoint load_checkpoint(const std::string& bytes);

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Max relative error of analytic vs central finite-difference gradients over
// every parameter of a tiny random model; the module's master numerical test.
// The reduced default width keeps the exhaustive sweep fast while running the
// exact forward/backward code used at full width.
double gradient_check_max_rel_err(int bit_dim, uint64_t seed, double h = 1e-4,
                                  ModelDims dims = {16, 2, 4});

} // namespace tureis
