#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wisva/error.hpp"
#include "wisva/grid.hpp"
#include "wisva/nn/layers.hpp"
#include "wisva/nn/tensor.hpp"
#include "wisva/rng.hpp"
#include "wisva/tensors.hpp"

namespace wisva {

enum class ModelKind : std::uint8_t { vae = 0, ae = 1 };

inline const char* to_string(ModelKind k) { return k == ModelKind::vae ? "vae" : "ae"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "vae") return ModelKind::vae;
  if (s == "ae") return ModelKind::ae;
  throw Error(ErrorCode::InvalidConfig, "unknown model kind '" + s + "'");
}

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

/// Architecture hyperparameters. Defaults: three stride-2 conv blocks per
/// branch (16, 32, 64 channels), one trunk conv, dense 256, latent 64.
struct ModelConfig {
  ModelKind kind = ModelKind::vae;
  int resolution = 64;
  int latent_dim = 64;
  std::array<int, 3> branch_channels{16, 32, 64};
  int trunk_channels = 64;
  int hidden = 256;
  /// LOS and nearest-shelf channels enter the distance branch.
  bool aux = true;
  /// Input scaling applied to metric channels before the first conv.
  double distance_scale = 1.0 / 30.0;
  double nearest_shelf_scale = 1.0 / 10.0;
  /// Initial bias of the log-variance head.
  double logvar_init = -9.0;

  void validate() const {
    if (resolution < 8 || resolution % 8 != 0) {
      throw Error(ErrorCode::InvalidResolution, "model resolution must be a multiple of 8");
    }
    if (latent_dim < 1 || hidden < 1 || trunk_channels < 1) throw Error(ErrorCode::InvalidConfig, "model widths");
    for (int c : branch_channels)
      if (c < 1) throw Error(ErrorCode::InvalidConfig, "branch channels");
  }

  int branch_inputs(int b) const { return b == 0 ? (aux ? 3 : 1) : 1; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-branch input planes for one sample.
template <typename T>
struct ModelInput {
  std::array<std::vector<T>, 3> branch;
};

/// Packs a sample's channels into the three branch groups.
template <typename T>
ModelInput<T> make_input(const SampleTensors& s, const ModelConfig& cfg) {
  const int n = cfg.resolution;
  if (s.rows() != n || s.cols() != n) {
    throw Error(ErrorCode::ShapeMismatch, "sample resolution " + std::to_string(s.rows()) + " vs model " +
                                              std::to_string(n));
  }
  if (cfg.aux && !s.has_aux()) throw Error(ErrorCode::ShapeMismatch, "model expects aux channels");
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  ModelInput<T> in;
  auto put = [&](std::vector<T>& dst, const GridF& g, double scale) {
    for (std::size_t k = 0; k < plane; ++k) dst.push_back(static_cast<T>(g.values()[k] * scale));
  };
  in.branch[0].reserve(plane * cfg.branch_inputs(0));
  put(in.branch[0], s.distance, cfg.distance_scale);
  if (cfg.aux) {
    put(in.branch[0], *s.los, 1.0);
    put(in.branch[0], *s.nearest_shelf, cfg.nearest_shelf_scale);
  }
  put(in.branch[1], s.permittivity, 1.0);
  put(in.branch[2], s.ap_map, 1.0);
  return in;
}

/// z = mu + exp(logvar / 2) * noise.
template <typename T>
std::vector<T> reparameterize(std::span<const T> mu, std::span<const T> logvar, std::span<const T> noise) {
  nn::check(mu.size() == logvar.size() && mu.size() == noise.size(), "reparameterize: shape mismatch");
  std::vector<T> z(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(logvar[i] / T{2}) * noise[i];
  return z;
}

/// Activations recorded by a forward pass, consumed by backward.
template <typename T>
struct Tape {
  const ModelInput<T>* input = nullptr;
  std::array<std::array<std::vector<T>, 3>, 3> branch;  ///< [branch][block] post-activation
  std::vector<T> concat;
  std::vector<T> trunk;
  std::vector<T> hidden;
  std::vector<T> mu;
  std::vector<T> logvar_raw;
  std::vector<T> logvar;
  std::vector<T> noise;
  std::vector<T> z;
  std::vector<T> dec0, dec1, dec2;
  std::vector<T> out;
};

/// Three-branch convolutional encoder, dense latent, transposed-conv decoder.
/// kind == vae adds the log-variance head and sampling; kind == ae uses the
/// mean head as a deterministic bottleneck.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    build();
    Rng rng(derive_seed(seed, 0x494e4954ull));
    init(rng);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  ModelKind kind() const noexcept { return cfg_.kind; }
  bool variational() const noexcept { return cfg_.kind == ModelKind::vae; }
  int latent_dim() const noexcept { return cfg_.latent_dim; }
  int resolution() const noexcept { return cfg_.resolution; }

  nn::ParamStore<T>& params() noexcept { return params_; }
  const nn::ParamStore<T>& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  /// Forward pass recording activations. `noise` may be empty (treated as 0).
  void forward(const ModelInput<T>& in, std::span<const T> noise, Tape<T>& tape) const {
    encode_into(in, tape);
    const std::size_t L = cfg_.latent_dim;
    tape.noise.assign(L, T{});
    if (!noise.empty()) {
      nn::check(noise.size() == L, "noise length must equal latent_dim");
      std::copy(noise.begin(), noise.end(), tape.noise.begin());
    }
    if (variational()) {
      tape.z = reparameterize<T>(tape.mu, tape.logvar, tape.noise);
    } else {
      tape.z = tape.mu;
    }
    decode_into(tape.z, tape);
  }

  /// Backpropagates d(objective)/d(out) plus kl_coef * KL(q || N(0, I))
  /// (VAE only) and accumulates parameter gradients into `grads`.
  void backward(const Tape<T>& tape, std::span<const T> dout, T kl_coef, T* grads) const {
    const T* p = params_.data();
    const int R = cfg_.resolution;
    const int s1 = R / 2, s2 = R / 4, s3 = R / 8;
    const auto [c1, c2, c3] = cfg_.branch_channels;
    std::vector<T>& scratch = scratch_;

    // decoder
    std::vector<T> d_out(dout.begin(), dout.end());
    nn::sigmoid_backward(tape.out.data(), d_out.data(), d_out.size());
    std::vector<T> d_dec2(static_cast<std::size_t>(c1) * s1 * s1);
    dec3_.backward(p, tape.dec2.data(), s1, s1, d_out.data(), d_dec2.data(), grads, scratch);
    nn::leaky_relu_backward(tape.dec2.data(), d_dec2.data(), d_dec2.size());
    std::vector<T> d_dec1(static_cast<std::size_t>(c2) * s2 * s2);
    dec2_.backward(p, tape.dec1.data(), s2, s2, d_dec2.data(), d_dec1.data(), grads, scratch);
    nn::leaky_relu_backward(tape.dec1.data(), d_dec1.data(), d_dec1.size());
    std::vector<T> d_dec0(static_cast<std::size_t>(c3) * s3 * s3);
    dec1_.backward(p, tape.dec0.data(), s3, s3, d_dec1.data(), d_dec0.data(), grads, scratch);
    nn::leaky_relu_backward(tape.dec0.data(), d_dec0.data(), d_dec0.size());
    const std::size_t L = cfg_.latent_dim;
    std::vector<T> dz(L);
    dec_dense_.backward(p, tape.z.data(), d_dec0.data(), dz.data(), grads);

    // latent
    std::vector<T> dmu(L), dlv(L, T{});
    for (std::size_t i = 0; i < L; ++i) {
      dmu[i] = dz[i];
      if (variational()) {
        const T s = std::exp(tape.logvar[i] / T{2});
        dmu[i] += kl_coef * tape.mu[i];
        T g = dz[i] * tape.noise[i] * s / T{2} + kl_coef * (std::exp(tape.logvar[i]) - T{1}) / T{2};
        const T raw = tape.logvar_raw[i];
        if (raw < static_cast<T>(kLogvarMin) || raw > static_cast<T>(kLogvarMax)) g = T{};
        dlv[i] = g;
      }
    }
    std::vector<T> dhidden(cfg_.hidden, T{});
    mu_.backward(p, tape.hidden.data(), dmu.data(), dhidden.data(), grads);
    if (variational()) {
      std::vector<T> dh2(cfg_.hidden);
      logvar_.backward(p, tape.hidden.data(), dlv.data(), dh2.data(), grads);
      for (int i = 0; i < cfg_.hidden; ++i) dhidden[i] += dh2[i];
    }
    nn::leaky_relu_backward(tape.hidden.data(), dhidden.data(), dhidden.size());
    std::vector<T> dtrunk(tape.trunk.size());
    hidden_.backward(p, tape.trunk.data(), dhidden.data(), dtrunk.data(), grads);
    nn::leaky_relu_backward(tape.trunk.data(), dtrunk.data(), dtrunk.size());
    std::vector<T> dconcat(tape.concat.size());
    trunk_.backward(p, tape.concat.data(), s3, s3, dtrunk.data(), dconcat.data(), grads, scratch);

    // branches
    const std::size_t piece = static_cast<std::size_t>(c3) * s3 * s3;
    for (int b = 0; b < 3; ++b) {
      std::vector<T> d3(dconcat.begin() + b * piece, dconcat.begin() + (b + 1) * piece);
      nn::leaky_relu_backward(tape.branch[b][2].data(), d3.data(), d3.size());
      std::vector<T> d2(static_cast<std::size_t>(c2) * s2 * s2);
      branch_[b][2].backward(p, tape.branch[b][1].data(), s2, s2, d3.data(), d2.data(), grads, scratch);
      nn::leaky_relu_backward(tape.branch[b][1].data(), d2.data(), d2.size());
      std::vector<T> d1(static_cast<std::size_t>(c1) * s1 * s1);
      branch_[b][1].backward(p, tape.branch[b][0].data(), s1, s1, d2.data(), d1.data(), grads, scratch);
      nn::leaky_relu_backward(tape.branch[b][0].data(), d1.data(), d1.size());
      branch_[b][0].backward(p, tape.input->branch[b].data(), R, R, d1.data(), static_cast<T*>(nullptr), grads,
                             scratch);
    }
  }

  /// Posterior parameters (mu, logvar). For the AE logvar is all zeros.
  std::pair<std::vector<T>, std::vector<T>> encode(const ModelInput<T>& in) const {
    Tape<T> tape;
    encode_into(in, tape);
    return {tape.mu, tape.logvar};
  }

  Grid<T> decode(std::span<const T> z) const {
    nn::check(z.size() == static_cast<std::size_t>(cfg_.latent_dim), "decode: z length must equal latent_dim");
    Tape<T> tape;
    decode_into(std::vector<T>(z.begin(), z.end()), tape);
    return to_grid(tape.out);
  }

  /// Eval-mode prediction: noise = 0, i.e. decode(mu).
  Grid<T> predict(const ModelInput<T>& in) const {
    Tape<T> tape;
    forward(in, {}, tape);
    return to_grid(tape.out);
  }

  Grid<T> predict(const SampleTensors& s) const { return predict(make_input<T>(s, cfg_)); }

  Grid<T> to_grid(const std::vector<T>& out) const {
    Grid<T> g(cfg_.resolution, cfg_.resolution);
    std::copy(out.begin(), out.end(), g.values().begin());
    return g;
  }

  /// Copies every parameter whose name exists in both models (shape-checked).
  template <typename U>
  void copy_params_from(const Model<U>& other) {
    for (const auto& info : params_.infos()) {
      const nn::ParamInfo* src = other.params().find(info.name);
      if (src == nullptr) continue;
      nn::check(src->dims == info.dims, "copy_params_from: shape mismatch for " + info.name);
      for (std::size_t k = 0; k < info.size; ++k)
        params_.values()[info.offset + k] = static_cast<T>(other.params().values()[src->offset + k]);
    }
  }

 private:
  void build() {
    const auto [c1, c2, c3] = cfg_.branch_channels;
    static const char* names[3] = {"enc.distance", "enc.permittivity", "enc.ap"};
    for (int b = 0; b < 3; ++b) {
      branch_[b][0] = nn::Conv2d{cfg_.branch_inputs(b), c1, 3, 2, 1};
      branch_[b][1] = nn::Conv2d{c1, c2, 3, 2, 1};
      branch_[b][2] = nn::Conv2d{c2, c3, 3, 2, 1};
      for (int k = 0; k < 3; ++k) branch_[b][k].declare(params_, std::string(names[b]) + ".conv" + std::to_string(k + 1));
    }
    const int s3 = cfg_.resolution / 8;
    trunk_ = nn::Conv2d{3 * c3, cfg_.trunk_channels, 3, 1, 1};
    trunk_.declare(params_, "enc.trunk");
    hidden_ = nn::Dense{cfg_.trunk_channels * s3 * s3, cfg_.hidden};
    hidden_.declare(params_, "enc.hidden");
    mu_ = nn::Dense{cfg_.hidden, cfg_.latent_dim};
    mu_.declare(params_, variational() ? "enc.mu" : "enc.bottleneck");
    if (variational()) {
      logvar_ = nn::Dense{cfg_.hidden, cfg_.latent_dim};
      logvar_.declare(params_, "enc.logvar");
    }
    dec_dense_ = nn::Dense{cfg_.latent_dim, c3 * s3 * s3};
    dec_dense_.declare(params_, "dec.dense");
    dec1_ = nn::ConvTranspose2d{c3, c2, 4, 2, 1};
    dec1_.declare(params_, "dec.up1");
    dec2_ = nn::ConvTranspose2d{c2, c1, 4, 2, 1};
    dec2_.declare(params_, "dec.up2");
    dec3_ = nn::ConvTranspose2d{c1, 1, 4, 2, 1};
    dec3_.declare(params_, "dec.up3");
  }

  void init(Rng& rng) {
    T* p = params_.data();
    for (auto& br : branch_)
      for (auto& l : br) l.init(p, rng);
    trunk_.init(p, rng);
    hidden_.init(p, rng);
    mu_.init(p, rng);
    if (variational()) {
      logvar_.init(p, rng);
      for (int i = 0; i < cfg_.latent_dim; ++i) p[logvar_.b_off + i] = static_cast<T>(cfg_.logvar_init);
    }
    dec_dense_.init(p, rng);
    dec1_.init(p, rng);
    dec2_.init(p, rng);
    dec3_.init(p, rng);
  }

  void encode_into(const ModelInput<T>& in, Tape<T>& tape) const {
    const T* p = params_.data();
    const int R = cfg_.resolution;
    const int s1 = R / 2, s2 = R / 4, s3 = R / 8;
    const auto [c1, c2, c3] = cfg_.branch_channels;
    const std::size_t plane = static_cast<std::size_t>(R) * R;
    for (int b = 0; b < 3; ++b) {
      if (in.branch[b].size() != plane * cfg_.branch_inputs(b)) {
        throw Error(ErrorCode::ShapeMismatch, "branch " + std::to_string(b) + " input size");
      }
    }
    tape.input = &in;
    std::vector<T>& scratch = scratch_;
    const std::size_t piece = static_cast<std::size_t>(c3) * s3 * s3;
    tape.concat.resize(3 * piece);
    for (int b = 0; b < 3; ++b) {
      auto& a = tape.branch[b];
      a[0].resize(static_cast<std::size_t>(c1) * s1 * s1);
      branch_[b][0].forward(p, in.branch[b].data(), R, R, a[0].data(), scratch);
      nn::leaky_relu(a[0].data(), a[0].size());
      a[1].resize(static_cast<std::size_t>(c2) * s2 * s2);
      branch_[b][1].forward(p, a[0].data(), s1, s1, a[1].data(), scratch);
      nn::leaky_relu(a[1].data(), a[1].size());
      a[2].resize(piece);
      branch_[b][2].forward(p, a[1].data(), s2, s2, a[2].data(), scratch);
      nn::leaky_relu(a[2].data(), a[2].size());
      std::copy(a[2].begin(), a[2].end(), tape.concat.begin() + b * piece);
    }
    tape.trunk.resize(static_cast<std::size_t>(cfg_.trunk_channels) * s3 * s3);
    trunk_.forward(p, tape.concat.data(), s3, s3, tape.trunk.data(), scratch);
    nn::leaky_relu(tape.trunk.data(), tape.trunk.size());
    tape.hidden.resize(cfg_.hidden);
    hidden_.forward(p, tape.trunk.data(), tape.hidden.data());
    nn::leaky_relu(tape.hidden.data(), tape.hidden.size());
    tape.mu.resize(cfg_.latent_dim);
    mu_.forward(p, tape.hidden.data(), tape.mu.data());
    tape.logvar_raw.assign(cfg_.latent_dim, T{});
    tape.logvar.assign(cfg_.latent_dim, T{});
    if (variational()) {
      logvar_.forward(p, tape.hidden.data(), tape.logvar_raw.data());
      for (int i = 0; i < cfg_.latent_dim; ++i)
        tape.logvar[i] =
            std::clamp(tape.logvar_raw[i], static_cast<T>(kLogvarMin), static_cast<T>(kLogvarMax));
    }
  }

  void decode_into(const std::vector<T>& z, Tape<T>& tape) const {
    const T* p = params_.data();
    const int R = cfg_.resolution;
    const int s1 = R / 2, s2 = R / 4, s3 = R / 8;
    const auto [c1, c2, c3] = cfg_.branch_channels;
    std::vector<T>& scratch = scratch_;
    if (&tape.z != &z) tape.z = z;
    tape.dec0.resize(static_cast<std::size_t>(c3) * s3 * s3);
    dec_dense_.forward(p, tape.z.data(), tape.dec0.data());
    nn::leaky_relu(tape.dec0.data(), tape.dec0.size());
    tape.dec1.resize(static_cast<std::size_t>(c2) * s2 * s2);
    dec1_.forward(p, tape.dec0.data(), s3, s3, tape.dec1.data(), scratch);
    nn::leaky_relu(tape.dec1.data(), tape.dec1.size());
    tape.dec2.resize(static_cast<std::size_t>(c1) * s1 * s1);
    dec2_.forward(p, tape.dec1.data(), s2, s2, tape.dec2.data(), scratch);
    nn::leaky_relu(tape.dec2.data(), tape.dec2.size());
    tape.out.resize(static_cast<std::size_t>(R) * R);
    dec3_.forward(p, tape.dec2.data(), s1, s1, tape.out.data(), scratch);
    nn::sigmoid(tape.out.data(), tape.out.size());
  }

  ModelConfig cfg_;
  nn::ParamStore<T> params_;
  std::array<std::array<nn::Conv2d, 3>, 3> branch_;
  nn::Conv2d trunk_;
  nn::Dense hidden_, mu_, logvar_, dec_dense_;
  nn::ConvTranspose2d dec1_, dec2_, dec3_;
  // Per-thread im2col buffer; Model methods are otherwise const and pure.
  static inline thread_local std::vector<T> scratch_;
};

}  // namespace wisva
