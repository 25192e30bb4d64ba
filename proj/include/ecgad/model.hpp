#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgad/autodiff.hpp"
#include "ecgad/config.hpp"

namespace ecgad {

// Architecture and loss trade-offs. The component flags carve out the
// ablation lattice: masking (MR), the local branch + cross-attention (MC),
// trend-assisted restoration (TAR) and attribute prediction (APM).
struct ModelConfig {
    int global_len = 5000;  // D
    int local_len = 500;    // d
    int embed_dim = 16;
    int encoder_depth = 4;  // stride-4 conv blocks
    int conv_kernel = 7;
    int heads = 4;
    int decoder_hidden = 16;
    int attr_hidden = 32;
    int classifier_hidden = 48;
    int classifier_depth = 4;  // residual blocks
    int n_classes = 0;         // 0 = no classifier head
    int n_attrs = 7;
    double alpha = 1.0;
    double beta = 1.0;
    double sigma_eps = 1e-6;
    bool use_masking = true;
    bool use_local = true;
    bool use_trend = true;
    bool use_attr = true;

    int stride_total() const;
    int token_count(int len) const;  // ceil(len / 4^depth)
    int combined_dim() const { return use_trend ? 2 * embed_dim : embed_dim; }
    void validate() const;

    // Keys carry the `model.` prefix.
    static ModelConfig from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

// Graph outputs of one forward pass. Sigmas are softplus(.)+eps, hence
// strictly positive; class_probs are per-class sigmoids (multi-label).
struct RestorationOutput {
    ad::Tensor global_recon;  // x_hat_g, length D
    ad::Tensor sigma_g;
    ad::Tensor local_recon;  // x_hat_l, length d (undefined when no local branch)
    ad::Tensor sigma_l;
    ad::Tensor trend_recon;  // x_hat_t, length D (undefined without TAR)
    ad::Tensor attr_pred;    // length m (undefined without APM)
    ad::Tensor class_logits;
    ad::Tensor class_probs;   // length n (undefined without classifier head)
    ad::Tensor global_tokens;  // pre-fusion (T_g, E), reused by callers
    ad::Tensor combined;       // pooled diagnostic feature
};

// Multi-scale cross-restoration network. Single-threaded during training;
// frozen inference is read-only and safe to share across threads.
class RestorationModel {
public:
    RestorationModel(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    std::vector<ad::Parameter>& parameters() { return params_; }
    const std::vector<ad::Parameter>& parameters() const { return params_; }
    std::vector<ad::Parameter> backbone_parameters() const;
    std::vector<ad::Parameter> classifier_parameters() const;

    ad::Tensor encode_global(const Eigen::VectorXd& masked_global) const;  // (T_g, E)
    ad::Tensor encode_local(const Eigen::VectorXd& masked_local) const;    // (T_l, E)
    // Concatenated token self-attention; output rows = T_g + T_l.
    ad::Tensor fuse(const ad::Tensor& global_tokens, const ad::Tensor& local_tokens) const;

    struct Decoded {
        ad::Tensor xhat_g, sigma_g, xhat_l, sigma_l;
    };
    Decoded decode(const ad::Tensor& fused_tokens, bool has_local) const;

    struct TrendOut {
        ad::Tensor xhat_t;
        ad::Tensor trend_tokens;  // (T_g, E)
    };
    // Reconstructs the ORIGINAL global signal from the trend signal plus the
    // pre-fusion global features.
    TrendOut trend_autoencode(const Eigen::VectorXd& trend,
                              const ad::Tensor& global_tokens) const;

    // Mean-pooled global tokens ++ mean-pooled trend tokens.
    ad::Tensor combined_features(const ad::Tensor& global_tokens,
                                 const ad::Tensor& trend_tokens) const;

    ad::Tensor predict_attributes(const ad::Tensor& combined) const;
    ad::Tensor classify_logits(const ad::Tensor& combined) const;
    ad::Tensor classify(const ad::Tensor& combined) const;  // sigmoid probs

    // Full pass; local/trend inputs are ignored when the config disables
    // those branches. Empty local input means "no beat available".
    RestorationOutput forward(const Eigen::VectorXd& global_in, const Eigen::VectorXd& local_in,
                              const Eigen::VectorXd& trend_in, bool with_classifier) const;

    // Checkpoint: text manifest (config + names/shapes) then a little-endian
    // float64 payload. `extra` keys ride along and come back on load.
    void save_checkpoint(const std::string& path, const Config& extra = {}) const;
    static RestorationModel load_checkpoint(const std::string& path, Config* extra = nullptr);

    // Byte-stable digest of all parameter payloads (frozen-ness checks).
    uint64_t parameter_hash() const;

    // Digest restricted to non-classifier parameters.
    uint64_t backbone_hash() const;

private:
    struct ConvStack {
        std::vector<ad::Tensor> w, b;
    };
    struct Heads {
        ad::Tensor w_rec, b_rec, w_sig, b_sig;
    };

    ad::Tensor new_param(const std::string& name, std::vector<int> shape, double init_std,
                         double bias_fill = 0.0);
    ConvStack make_encoder(const std::string& prefix);
    ConvStack make_decoder(const std::string& prefix);
    ad::Tensor run_encoder(const ConvStack& stack, const Eigen::VectorXd& input,
                           const ad::Tensor& pos) const;
    ad::Tensor run_decoder(const ConvStack& stack, const ad::Tensor& tokens, int target_len) const;

    ModelConfig cfg_;
    std::vector<ad::Parameter> params_;
    uint64_t init_cursor_ = 0;
    uint64_t seed_ = 0;

    ConvStack enc_g_, enc_l_, enc_t_, dec_g_, dec_l_, dec_t_;
    ad::Tensor pos_g_, pos_l_, pos_t_;
    // fusion block
    ad::Tensor ln1_g_, ln1_b_, wq_, bq_, wk_, wv_, bv_, wo_, bo_;
    ad::Tensor ln2_g_, ln2_b_, mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;
    Heads heads_g_, heads_l_;
    ad::Tensor trend_mix_w_, trend_mix_b_, trend_head_w_, trend_head_b_;
    ad::Tensor attr_w1_, attr_b1_, attr_w2_, attr_b2_;
    std::vector<ad::Tensor> cls_w_, cls_b_;  // stem, residual pairs, final
};

// Copies every checkpoint parameter whose name and shape match into `model`.
// Model parameters absent from the checkpoint must belong to the classifier
// head (fresh heads on top of a pretrained backbone); anything else errors.
void load_backbone(RestorationModel& model, const std::string& checkpoint_path);

}  // namespace ecgad
