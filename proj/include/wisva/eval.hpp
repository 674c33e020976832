#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wisva/error.hpp"
#include "wisva/grid.hpp"
#include "wisva/io/config.hpp"
#include "wisva/models.hpp"
#include "wisva/oracle.hpp"
#include "wisva/parallel.hpp"
#include "wisva/rng.hpp"
#include "wisva/tensors.hpp"
#include "wisva/training.hpp"

namespace wisva {

enum class Scenario : std::uint8_t { validation, denoising, extrapolation, fewshot };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::validation: return "validation";
    case Scenario::denoising: return "denoising";
    case Scenario::extrapolation: return "extrapolation";
    case Scenario::fewshot: return "fewshot";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "validation") return Scenario::validation;
  if (s == "denoising") return Scenario::denoising;
  if (s == "extrapolation") return Scenario::extrapolation;
  if (s == "fewshot") return Scenario::fewshot;
  throw Error(ErrorCode::InvalidConfig, "unknown scenario '" + s + "'");
}

/// |denormalize(target) - denormalize(pred)| per pixel, in dB.
template <typename A, typename B>
GridD error_heatmap(const Grid<A>& target, const Grid<B>& pred, double lo, double hi) {
  require_same_shape(target, pred, "error_heatmap");
  check_range(lo, hi);
  GridD out(target.rows(), target.cols());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.values()[k] = std::abs(denormalize_value(target.values()[k], lo, hi) - denormalize_value(pred.values()[k], lo, hi));
  }
  return out;
}

template <typename T>
double grid_mean(const Grid<T>& g) {
  if (g.size() == 0) return 0.0;
  double s = 0.0;
  for (const T& v : g.values()) s += static_cast<double>(v);
  return s / static_cast<double>(g.size());
}

template <typename T>
double grid_max(const Grid<T>& g) {
  double m = 0.0;
  for (const T& v : g.values()) m = std::max(m, static_cast<double>(v));
  return m;
}

/// Aggregate error of one model over a set of samples.
struct ModelResult {
  std::string name;
  double mae_db = 0.0;
  double max_pixel_error_db = 0.0;
  std::size_t samples = 0;
  /// Filled by the report writer.
  std::vector<std::string> error_map_paths;
};

/// Error map retained for export.
struct ErrorMap {
  std::string model;
  std::string label;
  GridD values;
};

struct EvalReport {
  Scenario scenario = Scenario::validation;
  std::uint64_t seed = 0;
  std::string config_json = "{}";
  std::vector<ModelResult> models;
  std::vector<ErrorMap> maps;
  /// Scenario-specific figures (gaps, MSEs, per-k rows, ...).
  nlohmann::json details = nlohmann::json::object();

  const ModelResult& model(const std::string& name) const {
    for (const auto& m : models)
      if (m.name == name) return m;
    throw Error(ErrorCode::InvalidConfig, "report has no model '" + name + "'");
  }
};

/// Accumulates per-sample error maps into a ModelResult.
class ErrorAccumulator {
 public:
  explicit ErrorAccumulator(std::string name) { r_.name = std::move(name); }

  void add(const GridD& err) {
    sum_ += grid_mean(err);
    r_.max_pixel_error_db = std::max(r_.max_pixel_error_db, grid_max(err));
    ++r_.samples;
  }

  ModelResult result() const {
    ModelResult r = r_;
    r.mae_db = r.samples > 0 ? sum_ / static_cast<double>(r.samples) : std::numeric_limits<double>::quiet_NaN();
    return r;
  }

 private:
  ModelResult r_;
  double sum_ = 0.0;
};

/// Per-pixel mean of the targets at `idx`.
inline GridD mean_target(const Dataset& d, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw Error(ErrorCode::EmptySplit, "mean predictor needs at least one sample");
  GridD m(d.samples[idx.front()].rows(), d.samples[idx.front()].cols());
  for (std::size_t i : idx) {
    const auto& t = d.samples[i].target.values();
    for (std::size_t k = 0; k < m.size(); ++k) m.values()[k] += t[k];
  }
  for (auto& v : m.values()) v /= static_cast<double>(idx.size());
  return m;
}

/// Seeded choice of `n` positions out of [0, count), in ascending order.
inline std::vector<std::size_t> pick_samples(std::size_t count, int n, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x4d415053ull));
  rng.shuffle(order);
  order.resize(std::min<std::size_t>(count, static_cast<std::size_t>(std::max(n, 0))));
  std::sort(order.begin(), order.end());
  return order;
}

/// Errors of one model on the samples `idx`; retains the maps listed in `keep`
/// (positions into idx).
inline ModelResult evaluate_model(const Model<float>& m, const Dataset& d, const PreparedData<float>& data,
                                  const std::vector<std::size_t>& idx, const std::string& name,
                                  const std::vector<std::size_t>& keep, std::vector<ErrorMap>* maps) {
  const auto preds = predict_all(m, data.inputs, idx);
  ErrorAccumulator acc(name);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    GridD err = error_heatmap(d.samples[idx[k]].target, preds[k], d.sinr_lo_db, d.sinr_hi_db);
    acc.add(err);
    if (maps != nullptr && std::binary_search(keep.begin(), keep.end(), k)) {
      maps->push_back(ErrorMap{name, "sample" + std::to_string(idx[k]), std::move(err)});
    }
  }
  return acc.result();
}

inline ModelResult evaluate_constant(const GridD& pred, const Dataset& d, const std::vector<std::size_t>& idx,
                                     const std::string& name, const std::vector<std::size_t>& keep,
                                     std::vector<ErrorMap>* maps) {
  ErrorAccumulator acc(name);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    GridD err = error_heatmap(d.samples[idx[k]].target, pred, d.sinr_lo_db, d.sinr_hi_db);
    acc.add(err);
    if (maps != nullptr && std::binary_search(keep.begin(), keep.end(), k)) {
      maps->push_back(ErrorMap{name, "sample" + std::to_string(idx[k]), std::move(err)});
    }
  }
  return acc.result();
}

/// Mean KL of the model's posteriors over `idx` (0 for the AE).
inline double mean_posterior_kl(const Model<float>& m, const PreparedData<float>& data,
                                const std::vector<std::size_t>& idx) {
  if (!m.variational() || idx.empty()) return 0.0;
  std::vector<double> kl(idx.size());
  parallel_for(idx.size(), [&](std::size_t k) {
    const auto [mu, lv] = m.encode(data.inputs[idx[k]]);
    kl[k] = kl_divergence<float>(mu, lv);
  });
  double s = 0.0;
  for (double v : kl) s += v;
  return s / static_cast<double>(idx.size());
}

/// VAE, AE and the per-pixel train-mean predictor on every val sample.
inline EvalReport scenario_validation(const Model<float>& vae, const Model<float>& ae, const Dataset& d,
                                      const EvalConfig& cfg, std::uint64_t seed) {
  const auto train = d.indices(Split::train);
  const auto val = d.indices(Split::val);
  if (val.empty()) throw Error(ErrorCode::EmptySplit, "validation scenario needs val samples");
  if (train.empty()) throw Error(ErrorCode::EmptySplit, "mean predictor needs train samples");
  EvalReport rep;
  rep.scenario = Scenario::validation;
  rep.seed = seed;
  rep.config_json = d.config_json;
  const auto keep = pick_samples(val.size(), cfg.error_map_samples, seed);
  const auto data_vae = prepare<float>(d, vae.config());
  rep.models.push_back(evaluate_model(vae, d, data_vae, val, "vae", keep, &rep.maps));
  const auto data_ae = prepare<float>(d, ae.config());
  rep.models.push_back(evaluate_model(ae, d, data_ae, val, "ae", keep, &rep.maps));
  rep.models.push_back(evaluate_constant(mean_target(d, train), d, val, "mean", keep, &rep.maps));
  rep.details["val_samples"] = val.size();
  rep.details["vae_val_kl"] = mean_posterior_kl(vae, data_vae, val);
  std::vector<std::size_t> kept;
  for (std::size_t k : keep) kept.push_back(val[k]);
  rep.details["error_map_samples"] = kept;
  return rep;
}

// --- denoising ----------------------------------------------------------------

struct DenoiseCase {
  double noisy_mse = 0.0;
  double noisy_mae = 0.0;
  double pred_mse = 0.0;
  double pred_mae = 0.0;
  GridD truth_db, noisy_db, pred_db;
};

/// Truth = oracle at hi_res; noisy = oracle at lo_res, nearest-upsampled to
/// hi_res; prediction = model on the hi_res physics tensors. Errors in dB.
inline DenoiseCase denoise_case(const Model<float>& m, const SceneTensors& st, const ApPlacement& ap,
                                const PropagationParams& p, const TensorConfig& tcfg, int hi_res, int lo_res) {
  if (lo_res < 1 || lo_res > hi_res) throw Error(ErrorCode::InvalidResolution, "need 1 <= lo_res <= hi_res");
  if (m.resolution() != hi_res || tcfg.resolution != hi_res) {
    throw Error(ErrorCode::InvalidResolution, "model and tensor resolution must equal hi_res");
  }
  DenoiseCase c;
  c.truth_db = oracle_heatmap(st, ap, p, hi_res, hi_res).values;
  c.noisy_db = resize(oracle_heatmap(st, ap, p, lo_res, lo_res).values, hi_res, hi_res, ResizeMode::nearest);
  const SampleTensors s = build_inputs(st, ap, tcfg);
  c.pred_db = denormalize_sinr(m.predict(s), tcfg.sinr_lo_db, tcfg.sinr_hi_db);
  const double n = static_cast<double>(c.truth_db.size());
  for (std::size_t k = 0; k < c.truth_db.size(); ++k) {
    // Compare inside the normalization range the model can represent.
    const double t = std::clamp(c.truth_db.values()[k], tcfg.sinr_lo_db, tcfg.sinr_hi_db);
    const double dn = std::clamp(c.noisy_db.values()[k], tcfg.sinr_lo_db, tcfg.sinr_hi_db) - t;
    const double dp = c.pred_db.values()[k] - t;
    c.noisy_mse += dn * dn / n;
    c.noisy_mae += std::abs(dn) / n;
    c.pred_mse += dp * dp / n;
    c.pred_mae += std::abs(dp) / n;
  }
  return c;
}

/// Denoising averaged over the (scene, AP) placements of `idx` in `d`.
inline EvalReport scenario_denoising(const Model<float>& m, const std::vector<WarehouseScene>& scenes,
                                     const Dataset& d, const std::vector<std::size_t>& idx,
                                     const PropagationParams& p, const TensorConfig& tcfg, int hi_res, int lo_res,
                                     std::uint64_t seed, int keep_maps = 2) {
  if (lo_res < 1 || lo_res > hi_res) throw Error(ErrorCode::InvalidResolution, "need 1 <= lo_res <= hi_res");
  if (idx.empty()) throw Error(ErrorCode::EmptySplit, "denoising needs at least one placement");
  std::vector<SceneTensors> st;
  st.reserve(scenes.size());
  for (const auto& s : scenes) st.emplace_back(s, hi_res);
  TensorConfig tc = tcfg;
  tc.resolution = hi_res;
  std::vector<DenoiseCase> cases(idx.size());
  parallel_for(idx.size(), [&](std::size_t k) {
    const SampleMeta& meta = d.samples[idx[k]].meta;
    if (meta.scene_index < 0 || meta.scene_index >= static_cast<int>(st.size())) {
      throw Error(ErrorCode::InvalidConfig, "sample references a scene that was not supplied");
    }
    cases[k] = denoise_case(m, st[meta.scene_index], meta.ap, p, tc, hi_res, lo_res);
  });
  EvalReport rep;
  rep.scenario = Scenario::denoising;
  rep.seed = seed;
  rep.config_json = d.config_json;
  double nmse = 0, nmae = 0, pmse = 0, pmae = 0, nmax = 0, pmax = 0;
  const auto keep = pick_samples(idx.size(), keep_maps, seed);
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& c = cases[k];
    nmse += c.noisy_mse;
    nmae += c.noisy_mae;
    pmse += c.pred_mse;
    pmae += c.pred_mae;
    GridD en(c.truth_db.rows(), c.truth_db.cols()), ep(en.rows(), en.cols());
    for (std::size_t q = 0; q < en.size(); ++q) {
      const double t = std::clamp(c.truth_db.values()[q], tc.sinr_lo_db, tc.sinr_hi_db);
      en.values()[q] = std::abs(std::clamp(c.noisy_db.values()[q], tc.sinr_lo_db, tc.sinr_hi_db) - t);
      ep.values()[q] = std::abs(c.pred_db.values()[q] - t);
    }
    nmax = std::max(nmax, grid_max(en));
    pmax = std::max(pmax, grid_max(ep));
    if (std::binary_search(keep.begin(), keep.end(), k)) {
      rep.maps.push_back(ErrorMap{"pixelated", "sample" + std::to_string(idx[k]), std::move(en)});
      rep.maps.push_back(ErrorMap{"model", "sample" + std::to_string(idx[k]), std::move(ep)});
    }
  }
  const double n = static_cast<double>(cases.size());
  rep.models.push_back(ModelResult{"pixelated", nmae / n, nmax, cases.size(), {}});
  rep.models.push_back(ModelResult{"model", pmae / n, pmax, cases.size(), {}});
  rep.details["hi_res"] = hi_res;
  rep.details["lo_res"] = lo_res;
  rep.details["placements"] = cases.size();
  rep.details["noisy_mse_db2"] = nmse / n;
  rep.details["pred_mse_db2"] = pmse / n;
  rep.details["mse_ratio"] = nmse > 0 ? pmse / nmse : std::numeric_limits<double>::infinity();
  rep.details["degenerate"] = lo_res == hi_res;
  return rep;
}

// --- extrapolation --------------------------------------------------------------

/// Cells whose LOS value differs from a 4-neighbour, dilated by `radius`
/// cells (Chebyshev).
inline Grid<std::uint8_t> los_boundary_band(const GridF& los, int radius) {
  const int H = los.rows(), W = los.cols();
  Grid<std::uint8_t> edge(H, W, 0), band(H, W, 0);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const float v = los(i, j);
      if ((i > 0 && los(i - 1, j) != v) || (i + 1 < H && los(i + 1, j) != v) || (j > 0 && los(i, j - 1) != v) ||
          (j + 1 < W && los(i, j + 1) != v)) {
        edge(i, j) = 1;
      }
    }
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      if (!edge(i, j)) continue;
      for (int di = -radius; di <= radius; ++di)
        for (int dj = -radius; dj <= radius; ++dj) {
          const int y = i + di, x = j + dj;
          if (y >= 0 && y < H && x >= 0 && x < W) band(y, x) = 1;
        }
    }
  return band;
}

/// Mean error near / away from the LOS boundary over a set of error maps.
struct BoundaryStats {
  double near_mean_db = 0.0;
  double far_mean_db = 0.0;
  std::size_t near_cells = 0;
  std::size_t far_cells = 0;
};

inline void accumulate_boundary(const GridD& err, const Grid<std::uint8_t>& band, BoundaryStats& s, double& near_sum,
                                double& far_sum) {
  for (std::size_t k = 0; k < err.size(); ++k) {
    if (band.values()[k]) {
      near_sum += err.values()[k];
      ++s.near_cells;
    } else {
      far_sum += err.values()[k];
      ++s.far_cells;
    }
  }
}

/// Tags samples: quadrant == test -> test, the rest split train/val by a
/// seeded shuffle at train_frac.
inline Dataset quadrant_holdout(const Dataset& d, Quadrant test_quadrant, double train_frac, std::uint64_t seed) {
  Dataset out = d;
  std::vector<std::size_t> rest;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d.samples[k].meta.quadrant == test_quadrant) {
      out.split[k] = Split::test;
    } else {
      rest.push_back(k);
    }
  }
  if (rest.size() == d.size()) throw Error(ErrorCode::EmptySplit, "held-out quadrant has no APs");
  if (rest.empty()) throw Error(ErrorCode::EmptySplit, "no APs outside the held-out quadrant");
  const auto split = assign_splits(rest.size(), train_frac, derive_seed(seed, 0x51554144ull));
  for (std::size_t k = 0; k < rest.size(); ++k) out.split[rest[k]] = split[k];
  return out;
}

/// Counts per quadrant; used to assert the partition of a sweep.
inline std::array<std::size_t, 4> quadrant_counts(const WarehouseScene& scene, const std::vector<ApPlacement>& sweep) {
  std::array<std::size_t, 4> n{};
  for (const auto& ap : sweep) ++n[static_cast<int>(quadrant_of(scene, ap)) - 1];
  return n;
}

struct ExtrapolationModels {
  std::optional<Model<float>> vae;
  std::optional<Model<float>> ae;
  LossTrace vae_trace;
  LossTrace ae_trace;
};

/// Trains fresh VAE and AE on the non-held-out quadrants and compares val
/// (in-distribution) with held-out-quadrant error.
inline EvalReport scenario_extrapolation(const Dataset& full, Quadrant test_quadrant, const ModelConfig& mcfg,
                                         const TrainConfig& tcfg, double train_frac, const EvalConfig& ecfg,
                                         std::uint64_t seed, ExtrapolationModels* trained = nullptr) {
  const Dataset d = quadrant_holdout(full, test_quadrant, train_frac, seed);
  const auto train = d.indices(Split::train);
  const auto val = d.indices(Split::val);
  const auto test = d.indices(Split::test);
  for (std::size_t k : train)
    if (d.samples[k].meta.quadrant == test_quadrant) throw Error(ErrorCode::InvalidConfig, "held-out AP in train");

  EvalReport rep;
  rep.scenario = Scenario::extrapolation;
  rep.seed = seed;
  rep.config_json = d.config_json;
  const auto keep = pick_samples(test.size(), ecfg.error_map_samples, seed);

  ModelConfig vc = mcfg, ac = mcfg;
  vc.kind = ModelKind::vae;
  ac.kind = ModelKind::ae;
  Model<float> vae(vc, derive_seed(seed, 0x564145ull));
  Model<float> ae(ac, derive_seed(seed, 0x4145ull));
  const LossTrace vt = fit(vae, d, tcfg);
  const LossTrace at = fit(ae, d, tcfg);
  const auto data = prepare<float>(d, vc);

  nlohmann::json per_model = nlohmann::json::object();
  for (const Model<float>* m : {&vae, &ae}) {
    const std::string name = to_string(m->kind());
    ModelResult in = evaluate_model(*m, d, data, val, name + "_val", {}, nullptr);
    ModelResult out = evaluate_model(*m, d, data, test, name, keep, &rep.maps);
    // Error concentration near LOS/NLOS transitions on the held-out quadrant.
    BoundaryStats bs;
    double near_sum = 0.0, far_sum = 0.0;
    if (d.samples.front().has_aux()) {
      const auto preds = predict_all(*m, data.inputs, test);
      for (std::size_t k = 0; k < test.size(); ++k) {
        const auto& s = d.samples[test[k]];
        accumulate_boundary(error_heatmap(s.target, preds[k], d.sinr_lo_db, d.sinr_hi_db),
                            los_boundary_band(*s.los, 2), bs, near_sum, far_sum);
      }
      bs.near_mean_db = bs.near_cells ? near_sum / static_cast<double>(bs.near_cells) : 0.0;
      bs.far_mean_db = bs.far_cells ? far_sum / static_cast<double>(bs.far_cells) : 0.0;
    }
    per_model[name] = {{"val_mae_db", in.mae_db},
                       {"test_mae_db", out.mae_db},
                       {"gap_ratio", out.mae_db / in.mae_db},
                       {"boundary_near_mae_db", bs.near_mean_db},
                       {"boundary_far_mae_db", bs.far_mean_db}};
    rep.models.push_back(in);
    rep.models.push_back(out);
  }
  std::array<std::size_t, 4> qc{};
  for (const auto& s : full.samples) ++qc[static_cast<int>(s.meta.quadrant) - 1];
  rep.details["test_quadrant"] = to_string(test_quadrant);
  rep.details["quadrant_counts"] = qc;
  rep.details["train"] = train.size();
  rep.details["val"] = val.size();
  rep.details["test"] = test.size();
  rep.details["train_contains_test_quadrant"] = false;
  rep.details["models"] = per_model;
  if (trained != nullptr) {
    trained->vae = vae;
    trained->ae = ae;
    trained->vae_trace = vt;
    trained->ae_trace = at;
  }
  return rep;
}

// --- few-shot -------------------------------------------------------------------

/// Shot pool = first max(shots) entries of a seeded permutation; the rest is
/// the common evaluation set. Selections are nested across k.
struct FewShotSelection {
  std::vector<std::size_t> pool;
  std::vector<std::size_t> eval;
};

inline FewShotSelection fewshot_selection(std::size_t available, const std::vector<int>& shots, std::uint64_t seed) {
  if (shots.empty()) throw Error(ErrorCode::InvalidConfig, "no shot counts given");
  if (!std::is_sorted(shots.begin(), shots.end())) throw Error(ErrorCode::InvalidConfig, "shots must be ascending");
  if (shots.front() < 0) throw Error(ErrorCode::InvalidConfig, "negative shot count");
  const std::size_t kmax = static_cast<std::size_t>(shots.back());
  if (kmax >= available) {
    throw Error(ErrorCode::InsufficientSamples, "max shots " + std::to_string(kmax) + " needs more than " +
                                                    std::to_string(available) + " samples");
  }
  std::vector<std::size_t> order(available);
  for (std::size_t i = 0; i < available; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x46455753ull));
  rng.shuffle(order);
  FewShotSelection s;
  s.pool.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kmax));
  s.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(kmax), order.end());
  return s;
}

/// Fine-tunes a copy of `pretrained` on k samples of the new scene for each k
/// and evaluates on the held-out remainder. k = 0 is the zero-shot model.
inline EvalReport scenario_fewshot(const Model<float>& pretrained, const Dataset& new_scene,
                                   const std::vector<int>& shots, const TrainConfig& base, int finetune_epochs,
                                   std::uint64_t seed) {
  const auto sel = fewshot_selection(new_scene.size(), shots, seed);
  const auto data = prepare<float>(new_scene, pretrained.config());
  EvalReport rep;
  rep.scenario = Scenario::fewshot;
  rep.seed = seed;
  rep.config_json = new_scene.config_json;
  nlohmann::json rows = nlohmann::json::array();
  for (int k : shots) {
    Model<float> m = pretrained;
    if (k > 0) {
      std::vector<std::size_t> train(sel.pool.begin(), sel.pool.begin() + k);
      TrainConfig tc = base;
      tc.epochs = finetune_epochs;
      tc.batch_size = std::min(base.batch_size, k);
      tc.checkpoint_every = 0;
      tc.seed = derive_seed(seed, 0x4654ull, static_cast<std::uint64_t>(k));
      FitState<float> st;
      fit_indices(m, data, train, {}, tc, st);
    }
    ModelResult r = evaluate_model(m, new_scene, data, sel.eval, "k" + std::to_string(k), {0}, &rep.maps);
    rows.push_back({{"k", k}, {"mae_db", r.mae_db}, {"max_pixel_error_db", r.max_pixel_error_db}});
    rep.models.push_back(std::move(r));
  }
  std::vector<std::size_t> pool = sel.pool;
  rep.details["shots"] = rows;
  rep.details["pool"] = pool;
  rep.details["eval_samples"] = sel.eval.size();
  return rep;
}

}  // namespace wisva
