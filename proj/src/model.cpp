#include "ecgad/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ecgad/errors.hpp"
#include "ecgad/rng.hpp"

namespace ecgad {

using ad::Tensor;

int ModelConfig::stride_total() const {
    int s = 1;
    for (int i = 0; i < encoder_depth; ++i) s *= 4;
    return s;
}

int ModelConfig::token_count(int len) const {
    int t = len;
    for (int i = 0; i < encoder_depth; ++i) t = (t + 3) / 4;
    return t;
}

void ModelConfig::validate() const {
    if (global_len < stride_total()) throw ConfigError("model: global_len too short for encoder depth");
    if (use_local && local_len < stride_total())
        throw ConfigError("model: local_len too short for encoder depth");
    if (embed_dim < heads || embed_dim % heads != 0)
        throw ConfigError("model: embed_dim must be divisible by heads");
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("model: alpha/beta must be >= 0");
    if (n_classes < 0 || n_attrs < 1) throw ConfigError("model: bad head sizes");
    if (encoder_depth < 1 || classifier_depth < 1) throw ConfigError("model: bad depths");
    if (conv_kernel % 2 != 1) throw ConfigError("model: conv kernel must be odd");
}

ModelConfig ModelConfig::from_config(const Config& cfg) {
    ModelConfig m;
    m.global_len = cfg.get_int("model.global_len", m.global_len);
    m.local_len = cfg.get_int("model.local_len", m.local_len);
    m.embed_dim = cfg.get_int("model.embed_dim", m.embed_dim);
    m.encoder_depth = cfg.get_int("model.encoder_depth", m.encoder_depth);
    m.conv_kernel = cfg.get_int("model.conv_kernel", m.conv_kernel);
    m.heads = cfg.get_int("model.heads", m.heads);
    m.decoder_hidden = cfg.get_int("model.decoder_hidden", m.decoder_hidden);
    m.attr_hidden = cfg.get_int("model.attr_hidden", m.attr_hidden);
    m.classifier_hidden = cfg.get_int("model.classifier_hidden", m.classifier_hidden);
    m.classifier_depth = cfg.get_int("model.classifier_depth", m.classifier_depth);
    m.n_classes = cfg.get_int("model.n_classes", m.n_classes);
    m.n_attrs = cfg.get_int("model.n_attrs", m.n_attrs);
    m.alpha = cfg.get_double("loss.alpha", m.alpha);
    m.beta = cfg.get_double("loss.beta", m.beta);
    m.sigma_eps = cfg.get_double("model.sigma_eps", m.sigma_eps);
    m.use_masking = cfg.get_bool("model.use_masking", m.use_masking);
    m.use_local = cfg.get_bool("model.use_local", m.use_local);
    m.use_trend = cfg.get_bool("model.use_trend", m.use_trend);
    m.use_attr = cfg.get_bool("model.use_attr", m.use_attr);
    m.validate();
    return m;
}

void ModelConfig::to_config(Config& cfg) const {
    cfg.set_int("model.global_len", global_len);
    cfg.set_int("model.local_len", local_len);
    cfg.set_int("model.embed_dim", embed_dim);
    cfg.set_int("model.encoder_depth", encoder_depth);
    cfg.set_int("model.conv_kernel", conv_kernel);
    cfg.set_int("model.heads", heads);
    cfg.set_int("model.decoder_hidden", decoder_hidden);
    cfg.set_int("model.attr_hidden", attr_hidden);
    cfg.set_int("model.classifier_hidden", classifier_hidden);
    cfg.set_int("model.classifier_depth", classifier_depth);
    cfg.set_int("model.n_classes", n_classes);
    cfg.set_int("model.n_attrs", n_attrs);
    cfg.set_double("loss.alpha", alpha);
    cfg.set_double("loss.beta", beta);
    cfg.set_double("model.sigma_eps", sigma_eps);
    cfg.set(std::string("model.use_masking"), use_masking ? "true" : "false");
    cfg.set(std::string("model.use_local"), use_local ? "true" : "false");
    cfg.set(std::string("model.use_trend"), use_trend ? "true" : "false");
    cfg.set(std::string("model.use_attr"), use_attr ? "true" : "false");
}

// ---------------------------------------------------------------------------

Tensor RestorationModel::new_param(const std::string& name, std::vector<int> shape, double init_std,
                                   double bias_fill) {
    int n = 1;
    for (int d : shape) n *= d;
    ad::Array values(n);
    if (init_std > 0.0) {
        Rng rng = Rng::derive(seed_, {0x9a7a, init_cursor_});
        for (int i = 0; i < n; ++i) values[i] = init_std * rng.normal();
    } else {
        values.setConstant(bias_fill);
    }
    ++init_cursor_;
    Tensor t = Tensor::variable(std::move(shape), std::move(values));
    params_.push_back({name, t});
    return t;
}

RestorationModel::ConvStack RestorationModel::make_encoder(const std::string& prefix) {
    ConvStack s;
    const int k = cfg_.conv_kernel, e = cfg_.embed_dim;
    for (int i = 0; i < cfg_.encoder_depth; ++i) {
        const int c_in = i == 0 ? 1 : e;
        const double std = std::sqrt(2.0 / (c_in * k));
        s.w.push_back(new_param(prefix + ".conv" + std::to_string(i) + ".w", {e, c_in, k}, std));
        s.b.push_back(new_param(prefix + ".conv" + std::to_string(i) + ".b", {e}, 0.0));
    }
    return s;
}

RestorationModel::ConvStack RestorationModel::make_decoder(const std::string& prefix) {
    ConvStack s;
    const int k = cfg_.conv_kernel, e = cfg_.embed_dim, h = cfg_.decoder_hidden;
    for (int i = 0; i < cfg_.encoder_depth; ++i) {
        const int c_in = i == 0 ? e : h;
        const double std = std::sqrt(2.0 / (c_in * k));
        s.w.push_back(new_param(prefix + ".conv" + std::to_string(i) + ".w", {h, c_in, k}, std));
        s.b.push_back(new_param(prefix + ".conv" + std::to_string(i) + ".b", {h}, 0.0));
    }
    return s;
}

RestorationModel::RestorationModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    const int e = cfg_.embed_dim;
    const int tg = cfg_.token_count(cfg_.global_len);
    const int tl = cfg_.token_count(cfg_.local_len);

    enc_g_ = make_encoder("enc_g");
    pos_g_ = new_param("enc_g.pos", {tg, e}, 0.02);
    dec_g_ = make_decoder("dec_g");
    // near-zero output heads keep the first forward calm for every seed:
    // reconstructions start flat and sigma starts at softplus(0.54) ~ 1
    const double head_std = 0.01;
    heads_g_.w_rec = new_param("dec_g.rec.w", {1, cfg_.decoder_hidden, 1}, head_std);
    heads_g_.b_rec = new_param("dec_g.rec.b", {1}, 0.0);
    heads_g_.w_sig = new_param("dec_g.sig.w", {1, cfg_.decoder_hidden, 1}, head_std);
    heads_g_.b_sig = new_param("dec_g.sig.b", {1}, 0.0, 0.54);

    if (cfg_.use_local) {
        enc_l_ = make_encoder("enc_l");
        pos_l_ = new_param("enc_l.pos", {tl, e}, 0.02);
        dec_l_ = make_decoder("dec_l");
        heads_l_.w_rec = new_param("dec_l.rec.w", {1, cfg_.decoder_hidden, 1}, head_std);
        heads_l_.b_rec = new_param("dec_l.rec.b", {1}, 0.0);
        heads_l_.w_sig = new_param("dec_l.sig.w", {1, cfg_.decoder_hidden, 1}, head_std);
        heads_l_.b_sig = new_param("dec_l.sig.b", {1}, 0.0, 0.54);

        const double lin_std = std::sqrt(2.0 / e);
        ln1_g_ = new_param("fuse.ln1.g", {e}, 0.0, 1.0);
        ln1_b_ = new_param("fuse.ln1.b", {e}, 0.0);
        wq_ = new_param("fuse.wq", {e, e}, lin_std);
        bq_ = new_param("fuse.bq", {e}, 0.0);
        wk_ = new_param("fuse.wk", {e, e}, lin_std);
        wv_ = new_param("fuse.wv", {e, e}, lin_std);
        bv_ = new_param("fuse.bv", {e}, 0.0);
        wo_ = new_param("fuse.wo", {e, e}, lin_std);
        bo_ = new_param("fuse.bo", {e}, 0.0);
        ln2_g_ = new_param("fuse.ln2.g", {e}, 0.0, 1.0);
        ln2_b_ = new_param("fuse.ln2.b", {e}, 0.0);
        mlp_w1_ = new_param("fuse.mlp.w1", {e, 2 * e}, lin_std);
        mlp_b1_ = new_param("fuse.mlp.b1", {2 * e}, 0.0);
        mlp_w2_ = new_param("fuse.mlp.w2", {2 * e, e}, std::sqrt(2.0 / (2 * e)));
        mlp_b2_ = new_param("fuse.mlp.b2", {e}, 0.0);
    }

    if (cfg_.use_trend) {
        enc_t_ = make_encoder("enc_t");
        pos_t_ = new_param("enc_t.pos", {tg, e}, 0.02);
        trend_mix_w_ = new_param("trend.mix.w", {2 * e, e}, std::sqrt(2.0 / (2 * e)));
        trend_mix_b_ = new_param("trend.mix.b", {e}, 0.0);
        dec_t_ = make_decoder("dec_t");
        trend_head_w_ = new_param("trend.rec.w", {1, cfg_.decoder_hidden, 1}, 0.01);
        trend_head_b_ = new_param("trend.rec.b", {1}, 0.0);
    }

    const int f = cfg_.combined_dim();
    if (cfg_.use_attr) {
        attr_w1_ = new_param("attr.w1", {f, cfg_.attr_hidden}, std::sqrt(2.0 / f));
        attr_b1_ = new_param("attr.b1", {cfg_.attr_hidden}, 0.0);
        attr_w2_ = new_param("attr.w2", {cfg_.attr_hidden, cfg_.n_attrs},
                             std::sqrt(2.0 / cfg_.attr_hidden));
        attr_b2_ = new_param("attr.b2", {cfg_.n_attrs}, 0.0);
    }

    if (cfg_.n_classes > 0) {
        const int h = cfg_.classifier_hidden;
        cls_w_.push_back(new_param("cls.stem.w", {f, h}, std::sqrt(2.0 / f)));
        cls_b_.push_back(new_param("cls.stem.b", {h}, 0.0));
        for (int i = 0; i < cfg_.classifier_depth; ++i) {
            const std::string p = "cls.block" + std::to_string(i);
            cls_w_.push_back(new_param(p + ".w1", {h, h}, std::sqrt(2.0 / h)));
            cls_b_.push_back(new_param(p + ".b1", {h}, 0.0));
            cls_w_.push_back(new_param(p + ".w2", {h, h}, std::sqrt(2.0 / h) * 0.5));
            cls_b_.push_back(new_param(p + ".b2", {h}, 0.0));
        }
        cls_w_.push_back(new_param("cls.out.w", {h, cfg_.n_classes}, std::sqrt(2.0 / h)));
        cls_b_.push_back(new_param("cls.out.b", {cfg_.n_classes}, 0.0));
    }
}

std::vector<ad::Parameter> RestorationModel::backbone_parameters() const {
    std::vector<ad::Parameter> out;
    for (const auto& p : params_)
        if (p.name.rfind("cls.", 0) != 0) out.push_back(p);
    return out;
}

std::vector<ad::Parameter> RestorationModel::classifier_parameters() const {
    std::vector<ad::Parameter> out;
    for (const auto& p : params_)
        if (p.name.rfind("cls.", 0) == 0) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------
// Forward pieces
// ---------------------------------------------------------------------------

Tensor RestorationModel::run_encoder(const ConvStack& stack, const Eigen::VectorXd& input,
                                     const ad::Tensor& pos) const {
    Tensor x = Tensor::constant({1, static_cast<int>(input.size())}, input.array());
    const int pad = cfg_.conv_kernel / 2;
    for (size_t i = 0; i < stack.w.size(); ++i)
        x = ad::gelu(ad::conv1d(x, stack.w[i], stack.b[i], 4, pad));
    Tensor tokens = ad::transpose(x);  // (T, E)
    return ad::add(tokens, pos);
}

Tensor RestorationModel::run_decoder(const ConvStack& stack, const ad::Tensor& tokens,
                                     int target_len) const {
    Tensor x = ad::transpose(tokens);  // (E, T)
    const int pad = cfg_.conv_kernel / 2;
    for (size_t i = 0; i < stack.w.size(); ++i) {
        x = ad::upsample_nn(x, 4);
        x = ad::conv1d(x, stack.w[i], stack.b[i], 1, pad);
        if (i + 1 < stack.w.size()) x = ad::gelu(x);
    }
    require(x.shape()[1] >= target_len, "decoder output shorter than target");
    return ad::slice(x, 1, 0, target_len);  // (hidden, target)
}

Tensor RestorationModel::encode_global(const Eigen::VectorXd& masked_global) const {
    require(static_cast<int>(masked_global.size()) == cfg_.global_len,
            "encode_global: input length != configured D");
    return run_encoder(enc_g_, masked_global, pos_g_);
}

Tensor RestorationModel::encode_local(const Eigen::VectorXd& masked_local) const {
    require(cfg_.use_local, "encode_local: local branch disabled");
    require(static_cast<int>(masked_local.size()) == cfg_.local_len,
            "encode_local: input length != configured d");
    return run_encoder(enc_l_, masked_local, pos_l_);
}

Tensor RestorationModel::fuse(const Tensor& global_tokens, const Tensor& local_tokens) const {
    require(cfg_.use_local, "fuse: local branch disabled");
    Tensor tokens = ad::concat({global_tokens, local_tokens}, 0);
    // pre-norm attention block with residuals
    Tensor h = ad::layer_norm(tokens, ln1_g_, ln1_b_);
    Tensor q = ad::add_rowvec(ad::matmul(h, wq_), bq_);
    Tensor k = ad::matmul(h, wk_);  // key bias is redundant: softmax is shift-invariant per row
    Tensor v = ad::add_rowvec(ad::matmul(h, wv_), bv_);
    Tensor attn = ad::attention(q, k, v, cfg_.heads);
    Tensor o = ad::add_rowvec(ad::matmul(attn, wo_), bo_);
    tokens = ad::add(tokens, o);
    Tensor m = ad::layer_norm(tokens, ln2_g_, ln2_b_);
    m = ad::gelu(ad::add_rowvec(ad::matmul(m, mlp_w1_), mlp_b1_));
    m = ad::add_rowvec(ad::matmul(m, mlp_w2_), mlp_b2_);
    return ad::add(tokens, m);
}

RestorationModel::Decoded RestorationModel::decode(const Tensor& fused_tokens,
                                                   bool has_local) const {
    const int tg = cfg_.token_count(cfg_.global_len);
    Decoded out;
    Tensor g_part = has_local ? ad::slice(fused_tokens, 0, 0, tg) : fused_tokens;
    Tensor gf = run_decoder(dec_g_, g_part, cfg_.global_len);
    out.xhat_g = ad::reshape(ad::conv1d(gf, heads_g_.w_rec, heads_g_.b_rec, 1, 0),
                             {cfg_.global_len});
    out.sigma_g = ad::add_scalar(
        ad::softplus(ad::reshape(ad::conv1d(gf, heads_g_.w_sig, heads_g_.b_sig, 1, 0),
                                 {cfg_.global_len})),
        cfg_.sigma_eps);
    if (has_local) {
        const int tl = cfg_.token_count(cfg_.local_len);
        Tensor l_part = ad::slice(fused_tokens, 0, tg, tl);
        Tensor lf = run_decoder(dec_l_, l_part, cfg_.local_len);
        out.xhat_l = ad::reshape(ad::conv1d(lf, heads_l_.w_rec, heads_l_.b_rec, 1, 0),
                                 {cfg_.local_len});
        out.sigma_l = ad::add_scalar(
            ad::softplus(ad::reshape(ad::conv1d(lf, heads_l_.w_sig, heads_l_.b_sig, 1, 0),
                                     {cfg_.local_len})),
            cfg_.sigma_eps);
    }
    return out;
}

RestorationModel::TrendOut RestorationModel::trend_autoencode(const Eigen::VectorXd& trend,
                                                              const Tensor& global_tokens) const {
    require(cfg_.use_trend, "trend_autoencode: trend branch disabled");
    require(static_cast<int>(trend.size()) == cfg_.global_len,
            "trend_autoencode: input length != configured D");
    TrendOut out;
    out.trend_tokens = run_encoder(enc_t_, trend, pos_t_);
    // per-token mix of trend and global features, then decode to length D
    Tensor mixed = ad::concat({global_tokens, out.trend_tokens}, 1);  // (T_g, 2E)
    mixed = ad::gelu(ad::add_rowvec(ad::matmul(mixed, trend_mix_w_), trend_mix_b_));
    Tensor tf = run_decoder(dec_t_, mixed, cfg_.global_len);
    out.xhat_t = ad::reshape(ad::conv1d(tf, trend_head_w_, trend_head_b_, 1, 0), {cfg_.global_len});
    return out;
}

Tensor RestorationModel::combined_features(const Tensor& global_tokens,
                                           const Tensor& trend_tokens) const {
    Tensor g = ad::mean_axis0(global_tokens);
    if (!cfg_.use_trend) return g;
    require(trend_tokens.defined(), "combined_features: trend tokens required");
    Tensor t = ad::mean_axis0(trend_tokens);
    return ad::concat({g, t}, 0);
}

Tensor RestorationModel::predict_attributes(const Tensor& combined) const {
    require(cfg_.use_attr, "predict_attributes: attribute head disabled");
    Tensor h = ad::reshape(combined, {1, cfg_.combined_dim()});
    h = ad::gelu(ad::add_rowvec(ad::matmul(h, attr_w1_), attr_b1_));
    h = ad::add_rowvec(ad::matmul(h, attr_w2_), attr_b2_);
    return ad::reshape(h, {cfg_.n_attrs});
}

Tensor RestorationModel::classify_logits(const Tensor& combined) const {
    require(cfg_.n_classes > 0, "classify: no classifier head configured");
    Tensor h = ad::reshape(combined, {1, cfg_.combined_dim()});
    size_t wi = 0;
    h = ad::add_rowvec(ad::matmul(h, cls_w_[wi]), cls_b_[wi]);
    ++wi;
    for (int i = 0; i < cfg_.classifier_depth; ++i) {
        Tensor inner = ad::gelu(ad::add_rowvec(ad::matmul(h, cls_w_[wi]), cls_b_[wi]));
        ++wi;
        inner = ad::add_rowvec(ad::matmul(inner, cls_w_[wi]), cls_b_[wi]);
        ++wi;
        h = ad::add(h, inner);  // residual
    }
    h = ad::add_rowvec(ad::matmul(h, cls_w_[wi]), cls_b_[wi]);
    return ad::reshape(h, {cfg_.n_classes});
}

Tensor RestorationModel::classify(const Tensor& combined) const {
    return ad::sigmoid(classify_logits(combined));
}

RestorationOutput RestorationModel::forward(const Eigen::VectorXd& global_in,
                                            const Eigen::VectorXd& local_in,
                                            const Eigen::VectorXd& trend_in,
                                            bool with_classifier) const {
    RestorationOutput out;
    out.global_tokens = encode_global(global_in);

    const bool has_local = cfg_.use_local && local_in.size() > 0;
    Tensor fused = out.global_tokens;
    if (has_local) {
        Tensor local_tokens = encode_local(local_in);
        fused = fuse(out.global_tokens, local_tokens);
    }
    Decoded dec = decode(fused, has_local);
    out.global_recon = dec.xhat_g;
    out.sigma_g = dec.sigma_g;
    out.local_recon = dec.xhat_l;
    out.sigma_l = dec.sigma_l;

    Tensor trend_tokens;
    if (cfg_.use_trend) {
        TrendOut t = trend_autoencode(trend_in, out.global_tokens);
        out.trend_recon = t.xhat_t;
        trend_tokens = t.trend_tokens;
    }
    out.combined = combined_features(out.global_tokens, trend_tokens);
    if (cfg_.use_attr) out.attr_pred = predict_attributes(out.combined);
    if (with_classifier && cfg_.n_classes > 0) {
        out.class_logits = classify_logits(out.combined);
        out.class_probs = ad::sigmoid(out.class_logits);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void RestorationModel::save_checkpoint(const std::string& path, const Config& extra) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    Config cfg = extra;
    cfg_.to_config(cfg);
    out << "ecgad-checkpoint 1\n";
    for (const auto& [k, v] : cfg.entries()) out << "config " << k << " = " << v << "\n";
    for (const auto& p : params_) {
        out << "param " << p.name;
        const auto& shape = p.tensor.shape();
        for (size_t i = 0; i < shape.size(); ++i) out << (i ? "," : " ") << shape[i];
        out << "\n";
    }
    out << "payload\n";
    for (const auto& p : params_) {
        const ad::Array& v = p.tensor.value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            uint64_t bits;
            double d = v[i];
            std::memcpy(&bits, &d, sizeof(bits));
            unsigned char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
            out.write(reinterpret_cast<const char*>(bytes), 8);
        }
    }
}

namespace {

struct RawCheckpoint {
    Config cfg;
    std::vector<std::string> names;
    std::vector<std::vector<int>> shapes;
    std::vector<ad::Array> values;
};

RawCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ecgad-checkpoint 1")
        throw DataError("not an ecgad checkpoint: " + path);

    RawCheckpoint raw;
    while (std::getline(in, line)) {
        if (line == "payload") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "config") {
            std::string key, eq;
            ls >> key >> eq;
            std::string value;
            std::getline(ls, value);
            size_t b = value.find_first_not_of(' ');
            raw.cfg.set(key, b == std::string::npos ? "" : value.substr(b));
        } else if (tag == "param") {
            std::string name, dims;
            ls >> name >> dims;
            std::vector<int> shape;
            size_t pos = 0;
            while (pos < dims.size()) {
                size_t comma = dims.find(',', pos);
                if (comma == std::string::npos) comma = dims.size();
                shape.push_back(std::stoi(dims.substr(pos, comma - pos)));
                pos = comma + 1;
            }
            raw.names.push_back(name);
            raw.shapes.push_back(shape);
        } else {
            throw DataError("bad checkpoint line: " + line);
        }
    }
    for (size_t i = 0; i < raw.names.size(); ++i) {
        int n = 1;
        for (int d : raw.shapes[i]) n *= d;
        ad::Array v(n);
        for (int j = 0; j < n; ++j) {
            unsigned char bytes[8];
            in.read(reinterpret_cast<char*>(bytes), 8);
            if (!in) throw DataError("checkpoint payload truncated: " + path);
            uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(bytes[b]) << (8 * b);
            double d;
            std::memcpy(&d, &bits, sizeof(d));
            v[j] = d;
        }
        raw.values.push_back(std::move(v));
    }
    return raw;
}

}  // namespace

RestorationModel RestorationModel::load_checkpoint(const std::string& path, Config* extra) {
    RawCheckpoint raw = read_checkpoint(path);
    ModelConfig mc = ModelConfig::from_config(raw.cfg);
    RestorationModel model(mc, 0);
    if (model.params_.size() != raw.names.size())
        throw ConfigError("checkpoint parameter count does not match the configured model");
    for (size_t i = 0; i < raw.names.size(); ++i) {
        auto& p = model.params_[i];
        if (p.name != raw.names[i] || p.tensor.shape() != raw.shapes[i])
            throw ConfigError("checkpoint manifest mismatch at `" + raw.names[i] +
                              "` (model expects `" + p.name + "`)");
        p.tensor.value() = raw.values[i];
    }
    if (extra) *extra = raw.cfg;
    return model;
}

void load_backbone(RestorationModel& model, const std::string& checkpoint_path) {
    RawCheckpoint raw = read_checkpoint(checkpoint_path);
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < raw.names.size(); ++i) index[raw.names[i]] = i;
    for (auto& p : model.parameters()) {
        auto it = index.find(p.name);
        if (it == index.end()) {
            if (p.name.rfind("cls.", 0) == 0) continue;  // fresh classifier head
            throw ConfigError("checkpoint lacks backbone parameter `" + p.name + "`");
        }
        if (p.tensor.shape() != raw.shapes[it->second])
            throw ConfigError("checkpoint shape mismatch at `" + p.name + "`");
        p.tensor.value() = raw.values[it->second];
    }
}

namespace {

uint64_t hash_params(const std::vector<ad::Parameter>& params, bool backbone_only) {
    // FNV-1a over the little-endian payload bytes.
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params) {
        if (backbone_only && p.name.rfind("cls.", 0) == 0) continue;
        const ad::Array& v = p.tensor.value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            uint64_t bits;
            double d = v[i];
            std::memcpy(&bits, &d, sizeof(bits));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

}  // namespace

uint64_t RestorationModel::parameter_hash() const { return hash_params(params_, false); }

uint64_t RestorationModel::backbone_hash() const { return hash_params(params_, true); }

}  // namespace ecgad
