// wisva: warehouse SINR heatmap pipeline (gen, train, eval, predict, export).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wisva/eval.hpp"
#include "wisva/io/checkpoint.hpp"
#include "wisva/io/config.hpp"
#include "wisva/io/dataset_io.hpp"
#include "wisva/io/png.hpp"
#include "wisva/io/report.hpp"
#include "wisva/log.hpp"
#include "wisva/parallel.hpp"
#include "wisva/pipeline.hpp"

namespace fs = std::filesystem;
using namespace wisva;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run config (defaults apply to missing keys)");
  app->add_option("--seed", c.seed, "Global seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Worker cap (0 = all cores)")->check(CLI::NonNegativeNumber);
}

RunConfig load_config(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) cfg = io::load_run_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  return cfg;
}

fs::path prepare_out(const Common& c) {
  const fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw Error(ErrorCode::Io, "cannot create output directory '" + c.out + "'" + (ec ? ": " + ec.message() : ""));
  }
  // Probe writability up front so failures surface before any work is done.
  const fs::path probe = out / ".wisva_write_probe";
  io::write_text(probe.string(), "");
  fs::remove(probe, ec);
  thread_limit().store(c.threads);
  return out;
}

void echo_config(const fs::path& out, const RunConfig& cfg, const std::string& name = "config.json") {
  io::write_text((out / name).string(), io::to_json(cfg).dump(2) + "\n");
}

RunConfig dataset_config(const Dataset& d) {
  RunConfig cfg;
  io::from_json_into(nlohmann::json::parse(d.config_json), cfg);
  return cfg;
}

std::vector<int> parse_shots(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad --shots entry '" + tok + "'");
    }
  }
  return out;
}

// --- gen ------------------------------------------------------------------------

struct GenArgs {
  Common common;
  std::optional<int> samples;
  std::optional<double> train_frac;
  bool dry_run = false;
};

int cmd_gen(const GenArgs& a) {
  RunConfig cfg = load_config(a.common);
  if (a.train_frac) cfg.tensors.train_frac = *a.train_frac;
  if (a.dry_run) {
    // Counting only: sample count from the sweep (or --samples), split sizes.
    std::size_t n = 0;
    if (a.samples) {
      n = static_cast<std::size_t>(*a.samples);
    } else {
      for (const auto& s : make_scenes(cfg)) n += ap_sweep_positions(s, cfg.tensors.sweep_spacing_m, cfg.scene.ap).size();
    }
    const auto split = assign_splits(n, cfg.tensors.train_frac, cfg.seed);
    const auto nt = static_cast<std::size_t>(std::count(split.begin(), split.end(), Split::train));
    std::cout << n << " samples, " << nt << " train / " << n - nt << " val\n";
    return kExitOk;
  }
  const fs::path out = prepare_out(a.common);
  const auto scenes = make_scenes(cfg);
  Dataset d = make_dataset(cfg, scenes);
  if (a.samples) {
    const auto n = static_cast<std::size_t>(*a.samples);
    if (n < 1 || n > d.size()) {
      throw Error(ErrorCode::InvalidConfig, "--samples must be in [1, " + std::to_string(d.size()) + "]");
    }
    d.samples.resize(n);
    d.split = assign_splits(n, cfg.tensors.train_frac, cfg.seed);
  }
  const std::uint64_t h = io::write_dataset(d, (out / "dataset.wsv").string());
  echo_config(out, cfg);
  std::cout << d.size() << " samples, " << d.count(Split::train) << " train / " << d.count(Split::val) << " val\n";
  log::info("dataset hash " + hex64(h));
  return kExitOk;
}

// --- train ----------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
  std::string model = "vae";
  std::string resume;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<double> beta;
  std::optional<int> checkpoint_every;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_config(a.common);
  const fs::path out = prepare_out(a.common);
  const Dataset d = io::read_dataset(a.data);
  // Tensor settings come from the dataset; training settings from the config.
  const RunConfig dcfg = dataset_config(d);
  cfg.tensors = dcfg.tensors;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.beta) cfg.train.beta_kl = *a.beta;
  if (a.checkpoint_every) cfg.train.checkpoint_every = *a.checkpoint_every;
  cfg.train.validate();
  const ModelKind kind = parse_model_kind(a.model);
  const std::string dhash = hex64(io::dataset_hash(io::encode_dataset(d)));
  const std::string ckpt_path = (out / (a.model + ".ckpt")).string();

  Model<float> m(model_config(cfg, kind), cfg.train.seed);
  FitState<float> state;
  if (!a.resume.empty()) {
    const io::Checkpoint c = io::read_checkpoint(a.resume);
    io::load_into(m, c);
    state = io::fit_state_from_checkpoint(c);
    log::info("resuming after epoch " + std::to_string(state.epochs_done));
  }
  const EpochCallback<float> save = [&](int, const Model<float>& model, const FitState<float>& st) {
    io::write_checkpoint(io::make_checkpoint(model, cfg.train, st, dhash), ckpt_path);
  };
  const LossTrace trace = fit(m, d, cfg.train, &state, save);
  io::write_checkpoint(io::make_checkpoint(m, cfg.train, state, dhash), ckpt_path);
  io::write_text((out / (a.model + "_loss.csv")).string(), trace.to_csv());
  echo_config(out, cfg, a.model + "_config.json");
  std::printf("%s: %zu epochs, final val_mae %.6f (%.4f dB)\n", a.model.c_str(), trace.size(),
              trace.epochs.back().val_mae, trace.epochs.back().val_mae * (d.sinr_hi_db - d.sinr_lo_db));
  return kExitOk;
}

// --- eval -----------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string scenario;
  std::string data;
  std::string vae;
  std::string ae;
  std::optional<std::string> test_quadrant;
  std::optional<std::string> shots;
  std::optional<int> epochs;
  std::optional<int> lo_res;
};

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg = load_config(a.common);
  const fs::path out = prepare_out(a.common);
  const Scenario sc = parse_scenario(a.scenario);
  if (a.epochs) {
    cfg.train.epochs = *a.epochs;
    cfg.eval.finetune_epochs = *a.epochs;
  }
  if (a.lo_res) cfg.eval.denoise_lo_res = *a.lo_res;
  if (a.test_quadrant) cfg.eval.test_quadrant = *a.test_quadrant;
  if (a.shots) cfg.eval.shots = parse_shots(*a.shots);

  auto need = [](const std::string& v, const char* flag) {
    if (v.empty()) throw Error(ErrorCode::InvalidConfig, std::string("scenario needs ") + flag);
  };
  auto load_model = [](const std::string& path) { return io::model_from_checkpoint(io::read_checkpoint(path)); };

  nlohmann::json prov;
  EvalReport rep;
  std::optional<Dataset> d;
  if (sc != Scenario::fewshot || !a.data.empty()) {
    need(a.data, "--data");
    d = io::read_dataset(a.data);
    const RunConfig dcfg = dataset_config(*d);
    cfg.seed = a.common.seed ? *a.common.seed : dcfg.seed;
    cfg.scene = dcfg.scene;
    cfg.num_scenes = dcfg.num_scenes;
    cfg.propagation = dcfg.propagation;
    cfg.tensors = dcfg.tensors;
    prov["dataset"] = a.data;
    prov["dataset_hash"] = hex64(io::dataset_hash(io::encode_dataset(*d)));
  }
  switch (sc) {
    case Scenario::validation: {
      need(a.vae, "--vae");
      need(a.ae, "--ae");
      const auto vae = load_model(a.vae);
      const auto ae = load_model(a.ae);
      if (vae.kind() != ModelKind::vae || ae.kind() != ModelKind::ae) {
        throw Error(ErrorCode::KindMismatch, "--vae/--ae checkpoints hold the wrong model kinds");
      }
      rep = scenario_validation(vae, ae, *d, cfg.eval, cfg.seed);
      prov["vae"] = a.vae;
      prov["ae"] = a.ae;
      break;
    }
    case Scenario::denoising: {
      need(a.vae, "--vae");
      const auto m = load_model(a.vae);
      const auto scenes = make_scenes(cfg);
      rep = scenario_denoising(m, scenes, *d, d->indices(Split::val), cfg.propagation, cfg.tensors,
                               cfg.tensors.resolution, cfg.eval.denoise_lo_res, cfg.seed);
      prov["model"] = a.vae;
      break;
    }
    case Scenario::extrapolation: {
      const Quadrant q = parse_quadrant(cfg.eval.test_quadrant);
      rep = scenario_extrapolation(*d, q, model_config(cfg, ModelKind::vae), cfg.train, cfg.tensors.train_frac,
                                   cfg.eval, cfg.seed);
      break;
    }
    case Scenario::fewshot: {
      need(a.vae, "--vae");
      const auto m = load_model(a.vae);
      RunConfig fc = cfg;
      fc.tensors.resolution = m.resolution();
      fc.tensors.aux = m.config().aux;
      const Dataset nd = make_fewshot_dataset(fc);
      rep = scenario_fewshot(m, nd, cfg.eval.shots, cfg.train, cfg.eval.finetune_epochs, cfg.seed);
      prov["pretrained"] = a.vae;
      break;
    }
  }
  const fs::path dir = io::write_report(rep, out, io::config_hash(cfg), prov);
  echo_config(dir, cfg);
  for (const auto& r : rep.models) std::printf("%-12s mae %.4f dB  max %.4f dB\n", r.name.c_str(), r.mae_db, r.max_pixel_error_db);
  std::printf("report: %s\n", dir.string().c_str());
  return kExitOk;
}

// --- predict --------------------------------------------------------------------

struct PredictArgs {
  Common common;
  std::string checkpoint;
  double ap_x = 0.0;
  double ap_y = 0.0;
  std::optional<int> scene_index;
  std::string png = "prediction.png";
};

int cmd_predict(const PredictArgs& a) {
  RunConfig cfg = load_config(a.common);
  const fs::path out = prepare_out(a.common);
  const Model<float> m = io::model_from_checkpoint(io::read_checkpoint(a.checkpoint));
  cfg.tensors.resolution = m.resolution();
  cfg.tensors.aux = m.config().aux;
  const WarehouseScene scene = generate_layout(scene_seed(cfg.seed, a.scene_index.value_or(0)), cfg.scene);
  ApPlacement ap{a.ap_x, a.ap_y, cfg.scene.ap.height_m, cfg.scene.ap.tx_power_dbm, cfg.scene.ap.carrier_hz, true};
  if (!scene.inside(ap.x, ap.y)) {
    throw Error(ErrorCode::InvalidScene, "AP (" + std::to_string(ap.x) + ", " + std::to_string(ap.y) +
                                             ") lies outside the " + std::to_string(scene.width_m) + " x " +
                                             std::to_string(scene.depth_m) + " m floor");
  }
  const SceneTensors st(scene, cfg.tensors.resolution);
  const SampleTensors s = build_inputs(st, ap, cfg.tensors);
  const GridD db = denormalize_sinr(m.predict(s), cfg.tensors.sinr_lo_db, cfg.tensors.sinr_hi_db);
  const fs::path png = out / a.png;
  io::export_heatmap_png(db, cfg.tensors.sinr_lo_db, cfg.tensors.sinr_hi_db, png.string());
  fs::path csv = png;
  csv.replace_extension(".csv");
  io::write_text(csv.string(), io::grid_csv(db));
  echo_config(out, cfg);
  std::printf("wrote %s and %s\n", png.string().c_str(), csv.string().c_str());
  return kExitOk;
}

// --- export ---------------------------------------------------------------------

struct ExportArgs {
  Common common;
  std::string data;
  int sample = 0;
  bool channels = false;
};

int cmd_export(const ExportArgs& a) {
  const fs::path out = prepare_out(a.common);
  const Dataset d = io::read_dataset(a.data);
  if (a.sample < 0 || static_cast<std::size_t>(a.sample) >= d.size()) {
    throw Error(ErrorCode::InvalidConfig, "--sample out of range [0, " + std::to_string(d.size()) + ")");
  }
  const SampleTensors& s = d.samples[static_cast<std::size_t>(a.sample)];
  const std::string stem = "sample" + std::to_string(a.sample);
  const GridD db = denormalize_sinr(s.target, d.sinr_lo_db, d.sinr_hi_db);
  io::export_heatmap_png(db, d.sinr_lo_db, d.sinr_hi_db, (out / (stem + "_sinr.png")).string());
  io::write_text((out / (stem + "_sinr.csv")).string(), io::grid_csv(db));
  if (a.channels) {
    static const char* names[] = {"distance", "permittivity", "ap_map", "los", "nearest_shelf"};
    for (int c = 0; c < s.channel_count(); ++c) {
      const GridF& g = s.channel(c);
      float lo = *std::min_element(g.values().begin(), g.values().end());
      float hi = *std::max_element(g.values().begin(), g.values().end());
      if (!(hi > lo)) hi = lo + 1.0f;
      io::export_heatmap_png(g, lo, hi, (out / (stem + "_" + names[c] + ".png")).string());
    }
  }
  std::printf("exported sample %d (scene %d, AP %d, quadrant %s)\n", a.sample, s.meta.scene_index,
              s.meta.ap_index, to_string(s.meta.quadrant));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warehouse SINR heatmap generation, VAE/AE training and evaluation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate scenes and the SINR dataset");
  add_common(g, gen.common);
  g->add_option("--samples", gen.samples, "Keep only the first N samples")->check(CLI::PositiveNumber);
  g->add_option("--train-frac", gen.train_frac, "Training fraction")->check(CLI::Range(0.0, 1.0));
  g->add_flag("--dry-run", gen.dry_run, "Print counts without generating");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a VAE or AE on a dataset");
  add_common(t, tr.common);
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("--model", tr.model, "vae or ae")->check(CLI::IsMember({"vae", "ae"}));
  t->add_option("--resume", tr.resume, "Checkpoint to resume from");
  t->add_option("--epochs", tr.epochs, "Epochs")->check(CLI::PositiveNumber);
  t->add_option("--batch-size", tr.batch_size, "Batch size")->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.lr, "Adam learning rate");
  t->add_option("--beta", tr.beta, "KL weight");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint interval in epochs");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Run an evaluation scenario");
  add_common(e, ev.common);
  e->add_option("--scenario", ev.scenario, "validation | denoising | extrapolation | fewshot")
      ->required()
      ->check(CLI::IsMember({"validation", "denoising", "extrapolation", "fewshot"}));
  e->add_option("--data", ev.data, "Dataset file");
  e->add_option("--vae", ev.vae, "VAE checkpoint (or the model for denoising/fewshot)");
  e->add_option("--ae", ev.ae, "AE checkpoint");
  e->add_option("--test-quadrant", ev.test_quadrant, "Held-out quadrant (I..IV)");
  e->add_option("--shots", ev.shots, "Comma-separated shot counts, ascending");
  e->add_option("--epochs", ev.epochs, "Training / fine-tuning epochs")->check(CLI::PositiveNumber);
  e->add_option("--lo-res", ev.lo_res, "Pixelated resolution for denoising")->check(CLI::PositiveNumber);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict the heatmap for one AP placement");
  add_common(p, pr.common);
  p->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required();
  p->add_option("--ap-x", pr.ap_x, "AP x in meters")->required();
  p->add_option("--ap-y", pr.ap_y, "AP y in meters")->required();
  p->add_option("--scene", pr.scene_index, "Scene index under the run seed (default 0)");
  p->add_option("--png", pr.png, "Output PNG name (raw dB values go next to it as .csv)");

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "Export a dataset sample as PNG and CSV");
  add_common(x, ex.common);
  x->add_option("--data", ex.data, "Dataset file")->required();
  x->add_option("--sample", ex.sample, "Sample index");
  x->add_flag("--channels", ex.channels, "Also export the input channels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*p) return cmd_predict(pr);
    if (*x) return cmd_export(ex);
  } catch (const Error& err) {
    log::error(std::string(to_string(err.code())) + ": " + err.what());
    return err.is_internal() ? kExitInternal : kExitUser;
  } catch (const std::exception& err) {
    log::error(std::string("internal: ") + err.what());
    return kExitInternal;
  }
  return kExitInternal;
}
