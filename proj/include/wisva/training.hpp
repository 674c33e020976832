#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "wisva/error.hpp"
#include "wisva/grid.hpp"
#include "wisva/log.hpp"
#include "wisva/models.hpp"
#include "wisva/nn/adam.hpp"
#include "wisva/parallel.hpp"
#include "wisva/rng.hpp"
#include "wisva/tensors.hpp"

namespace wisva {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr = 1e-3;
  double beta_kl = 1e-3;
  std::uint64_t seed = 42;
  /// Epoch interval for the checkpoint callback; 0 disables it.
  int checkpoint_every = 0;
  /// Cosine decay of the learning rate from lr to 0 over the run.
  bool cosine_lr = false;
  /// Linear ramp of beta_kl from 0 over the first epochs; 0 disables it.
  int kl_warmup_epochs = 0;

  void validate() const {
    if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (!(lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "lr must be > 0");
    if (!(beta_kl >= 0.0)) throw Error(ErrorCode::InvalidConfig, "beta_kl must be >= 0");
    if (checkpoint_every < 0) throw Error(ErrorCode::InvalidConfig, "checkpoint_every must be >= 0");
    if (kl_warmup_epochs < 0) throw Error(ErrorCode::InvalidConfig, "kl_warmup_epochs must be >= 0");
  }

  /// Learning rate used during 0-based epoch e.
  double lr_at(int e) const {
    if (!cosine_lr) return lr;
    return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(e) / static_cast<double>(epochs)));
  }

  /// KL weight used during 0-based epoch e.
  double beta_at(int e) const {
    if (kl_warmup_epochs <= 0 || e >= kl_warmup_epochs) return beta_kl;
    return beta_kl * static_cast<double>(e + 1) / static_cast<double>(kl_warmup_epochs + 1);
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
  double train_mae = 0.0;
  double train_kl = 0.0;
  double val_mae = 0.0;
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct LossTrace {
  std::vector<EpochStats> epochs;

  std::size_t size() const noexcept { return epochs.size(); }

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,train_mae,train_kl,val_mae\n";
    for (std::size_t e = 0; e < epochs.size(); ++e)
      os << e + 1 << ',' << epochs[e].train_mae << ',' << epochs[e].train_kl << ',' << epochs[e].val_mae << '\n';
    return os.str();
  }

  friend bool operator==(const LossTrace&, const LossTrace&) = default;
};

/// (1/n) sum |x - xhat|, accumulated in double.
template <typename A, typename B>
double mae_loss(const Grid<A>& x, const Grid<B>& xhat) {
  require_same_shape(x, xhat, "mae_loss");
  if (x.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    s += std::abs(static_cast<double>(x.values()[k]) - static_cast<double>(xhat.values()[k]));
  return s / static_cast<double>(x.size());
}

/// KL(N(mu, exp(logvar)) || N(0, I)) = -1/2 sum (1 + logvar - mu^2 - exp(logvar)).
template <typename T>
double kl_divergence(std::span<const T> mu, std::span<const T> logvar) {
  if (mu.size() != logvar.size()) throw Error(ErrorCode::ShapeMismatch, "kl_divergence: mu/logvar length");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = mu[i];
    const double lv = logvar[i];
    s += std::exp(lv) + m * m - 1.0 - lv;
  }
  return 0.5 * s;
}

inline double kl_divergence(const std::vector<double>& mu, const std::vector<double>& logvar) {
  return kl_divergence<double>(std::span<const double>(mu), std::span<const double>(logvar));
}

/// Loss components of one step, averaged over the batch.
struct StepLoss {
  double mae = 0.0;
  double kl = 0.0;
  double total = 0.0;  ///< mae + beta_kl * kl
};

template <typename T>
struct BatchItem {
  const ModelInput<T>* input = nullptr;
  const GridF* target = nullptr;
  std::vector<T> noise;  ///< empty means zero noise
};

/// Standard-normal reparameterization noise for (seed, epoch, sample).
template <typename T>
std::vector<T> sample_noise(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample, int latent_dim) {
  Rng rng(derive_seed(derive_seed(seed, 0x4e4f495345ull, epoch), sample, 0));
  std::vector<T> n(latent_dim);
  for (auto& v : n) v = static_cast<T>(rng.normal());
  return n;
}

namespace detail {

// Number of fixed gradient slots. Samples go to slot (k mod S) and slots are
// reduced in index order, so results do not depend on the worker count.
inline std::size_t grad_slots(std::size_t batch) { return std::min<std::size_t>(4, batch); }

}  // namespace detail

/// One Adam update on the batch objective mean_b(mae_b + beta_kl * kl_b).
template <typename T>
StepLoss train_step(Model<T>& model, const std::vector<BatchItem<T>>& batch, const TrainConfig& cfg,
                    nn::AdamState<T>& opt) {
  if (batch.empty()) throw Error(ErrorCode::EmptySplit, "train_step: empty batch");
  const std::size_t P = model.parameter_count();
  const std::size_t B = batch.size();
  const std::size_t S = detail::grad_slots(B);
  const T beta = model.variational() ? static_cast<T>(cfg.beta_kl) : T{};
  std::vector<std::vector<T>> slot_grads(S);
  std::vector<double> mae(B, 0.0), kl(B, 0.0);

  parallel_for(S, [&](std::size_t s) {
    auto& g = slot_grads[s];
    g.assign(P, T{});
    Tape<T> tape;
    std::vector<T> dout;
    for (std::size_t k = s; k < B; k += S) {
      const BatchItem<T>& item = batch[k];
      model.forward(*item.input, std::span<const T>(item.noise), tape);
      const auto& target = item.target->values();
      const std::size_t n = tape.out.size();
      if (target.size() != n) throw Error(ErrorCode::ShapeMismatch, "target resolution differs from model");
      dout.resize(n);
      double acc = 0.0;
      const T inv_n = T{1} / static_cast<T>(n);
      for (std::size_t q = 0; q < n; ++q) {
        const double diff = static_cast<double>(tape.out[q]) - static_cast<double>(target[q]);
        acc += std::abs(diff);
        dout[q] = diff > 0 ? inv_n : (diff < 0 ? -inv_n : T{});
      }
      mae[k] = acc / static_cast<double>(n);
      if (model.variational()) kl[k] = kl_divergence<T>(tape.mu, tape.logvar);
      model.backward(tape, dout, beta, g.data());
    }
  });

  StepLoss loss;
  for (std::size_t k = 0; k < B; ++k) {
    loss.mae += mae[k];
    loss.kl += kl[k];
  }
  loss.mae /= static_cast<double>(B);
  loss.kl /= static_cast<double>(B);
  loss.total = loss.mae + (model.variational() ? cfg.beta_kl : 0.0) * loss.kl;
  if (!std::isfinite(loss.total)) {
    throw Error(ErrorCode::NonFiniteLoss, "non-finite loss (mae=" + std::to_string(loss.mae) +
                                              ", kl=" + std::to_string(loss.kl) + ")");
  }

  std::vector<T>& total = slot_grads[0];
  for (std::size_t s = 1; s < S; ++s)
    for (std::size_t i = 0; i < P; ++i) total[i] += slot_grads[s][i];
  const T inv_b = T{1} / static_cast<T>(B);
  for (auto& v : total) v *= inv_b;
  opt.lr = cfg.lr;
  nn::adam_step<T>(std::span<T>(model.params().values()), std::span<const T>(total), opt);
  return loss;
}

/// Eval-mode (noise = 0) predictions for the given samples.
template <typename T>
std::vector<Grid<T>> predict_all(const Model<T>& model, const std::vector<ModelInput<T>>& inputs,
                                 const std::vector<std::size_t>& idx) {
  std::vector<Grid<T>> out(idx.size());
  parallel_for(idx.size(), [&](std::size_t k) { out[k] = model.predict(inputs[idx[k]]); });
  return out;
}

/// Mean normalized MAE in eval mode; NaN when idx is empty.
template <typename T>
double eval_mae(const Model<T>& model, const std::vector<ModelInput<T>>& inputs, const std::vector<GridF>& targets,
                const std::vector<std::size_t>& idx) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto preds = predict_all(model, inputs, idx);
  double s = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) s += mae_loss(targets[idx[k]], preds[k]);
  return s / static_cast<double>(idx.size());
}

/// Model inputs and targets for every sample of a dataset.
template <typename T>
struct PreparedData {
  std::vector<ModelInput<T>> inputs;
  std::vector<GridF> targets;
};

template <typename T>
PreparedData<T> prepare(const Dataset& d, const ModelConfig& cfg) {
  PreparedData<T> p;
  p.inputs.resize(d.size());
  p.targets.resize(d.size());
  parallel_for(d.size(), [&](std::size_t k) {
    p.inputs[k] = make_input<T>(d.samples[k], cfg);
    p.targets[k] = d.samples[k].target;
  });
  return p;
}

/// Optimizer and progress state; everything needed to resume.
template <typename T>
struct FitState {
  int epochs_done = 0;
  LossTrace trace;
  nn::AdamState<T> adam;
};

template <typename T>
using EpochCallback = std::function<void(int epoch, const Model<T>&, const FitState<T>&)>;

/// Trains on `train` indices, tracks eval-mode MAE on `val` indices. Resumes
/// from `state` (epochs_done > 0) and runs until cfg.epochs.
template <typename T>
void fit_indices(Model<T>& model, const PreparedData<T>& data, const std::vector<std::size_t>& train,
                 const std::vector<std::size_t>& val, const TrainConfig& cfg, FitState<T>& state,
                 const EpochCallback<T>& on_epoch = {}) {
  cfg.validate();
  if (train.empty()) throw Error(ErrorCode::EmptySplit, "no training samples");
  if (state.adam.m.empty()) {
    state.adam.reset(model.parameter_count());
    state.adam.lr = cfg.lr;
  }
  for (int epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x53485546ull, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    TrainConfig step_cfg = cfg;
    step_cfg.lr = cfg.lr_at(epoch);
    step_cfg.beta_kl = cfg.beta_at(epoch);
    EpochStats st;
    double kl_sum = 0.0, mae_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<BatchItem<T>> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        BatchItem<T> item{&data.inputs[idx], &data.targets[idx], {}};
        if (model.variational()) item.noise = sample_noise<T>(cfg.seed, epoch, idx, model.latent_dim());
        batch.push_back(std::move(item));
      }
      const StepLoss l = train_step(model, batch, step_cfg, state.adam);
      mae_sum += l.mae * static_cast<double>(end - start);
      kl_sum += l.kl * static_cast<double>(end - start);
    }
    st.train_mae = mae_sum / static_cast<double>(order.size());
    st.train_kl = kl_sum / static_cast<double>(order.size());
    st.val_mae = eval_mae(model, data.inputs, data.targets, val);
    state.trace.epochs.push_back(st);
    state.epochs_done = epoch + 1;
    log::info("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
              " train_mae=" + std::to_string(st.train_mae) + " kl=" + std::to_string(st.train_kl) +
              " val_mae=" + std::to_string(st.val_mae));
    if (on_epoch && cfg.checkpoint_every > 0 &&
        (state.epochs_done % cfg.checkpoint_every == 0 || state.epochs_done == cfg.epochs)) {
      on_epoch(state.epochs_done, model, state);
    }
  }
}

/// Trains on the dataset's train split, validating on its val split.
template <typename T>
LossTrace fit(Model<T>& model, const Dataset& d, const TrainConfig& cfg, FitState<T>* resume = nullptr,
              const EpochCallback<T>& on_epoch = {}) {
  const auto train = d.indices(Split::train);
  const auto val = d.indices(Split::val);
  if (train.empty()) throw Error(ErrorCode::EmptySplit, "dataset has no train samples");
  if (val.empty()) throw Error(ErrorCode::EmptySplit, "dataset has no val samples");
  if (d.resolution != model.resolution()) throw Error(ErrorCode::ShapeMismatch, "dataset/model resolution differ");
  const auto data = prepare<T>(d, model.config());
  FitState<T> local;
  FitState<T>& state = resume != nullptr ? *resume : local;
  fit_indices(model, data, train, val, cfg, state, on_epoch);
  return state.trace;
}

}  // namespace wisva
