// vdpm command line: synthetic data, training, adaptation, detection,
// evaluation and the full experiment matrix.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vdpm/adapt.hpp"
#include "vdpm/config.hpp"
#include "vdpm/errors.hpp"
#include "vdpm/eval.hpp"
#include "vdpm/experiment.hpp"
#include "vdpm/image.hpp"
#include "vdpm/inference.hpp"
#include "vdpm/synth.hpp"
#include "vdpm/train.hpp"

namespace fs = std::filesystem;
using namespace vdpm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

KeyValue load_config(const Common& c) {
  KeyValue kv;
  if (!c.config_path.empty()) kv = KeyValue::load(c.config_path);
  if (c.seed_set) kv.set("seed", std::to_string(c.seed));
  kv.set_int("threads", c.threads);
  return kv;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value config file");
  cmd->add_option("--seed", c.seed, "master RNG seed (overrides config)")
      ->each([&c](const std::string&) { c.seed_set = true; });
  cmd->add_option("--threads", c.threads, "worker threads for per-image stages");
}

int cmd_synth(const Common& common, const std::string& domain, const std::string& out_dir, int n,
              int width, int height, std::uint64_t seed_override, bool seed_given) {
  KeyValue kv = load_config(common);
  DomainSpec spec;
  if (domain == "source")
    spec = default_shift_pair().first;
  else if (domain == "target")
    spec = default_shift_pair().second;
  else
    spec = read_domain_spec(domain);
  if (seed_given) spec.seed = seed_override;
  const Dataset d = generate(spec, n, width, height, out_dir);
  const DatasetStats st = dataset_stats(d, train_config_from(kv).classes);
  std::cout << "generated " << st.images << " images, " << st.moderate_vehicles
            << " moderate vehicles -> " << out_dir << "\n";
  return 0;
}

int cmd_train(const Common& common, const std::string& data_path, const std::string& mix_path,
              const std::string& out_path) {
  const KeyValue kv = load_config(common);
  const TrainConfig cfg = train_config_from(kv);
  Dataset data = load_manifest(data_path);
  if (!mix_path.empty()) data = concat(data, load_manifest(mix_path), data.name + "+mix");
  std::vector<TrainLogRow> log;
  const DpmModel model = train(data, cfg, &log);
  save_model(model, out_path);
  write_train_log(out_path + ".train_log.csv", log);
  std::cout << "model -> " << out_path << " (threshold " << model.threshold << ")\n";
  return 0;
}

int cmd_adapt(const Common& common, const std::string& src_model_path,
              const std::string& data_path, double x, const std::string& out_path) {
  const KeyValue kv = load_config(common);
  AdaptConfig cfg = adapt_config_from(kv);
  const DpmModel src = load_model(src_model_path);
  Dataset target = load_manifest(data_path);
  if (x < 1.0) target = subset_images(target, {x, cfg.train.seed});
  std::vector<AdaptLogRow> log;
  VectorX beta;
  const DpmModel model = adapt(src, target, cfg, &log, &beta);
  save_model(model, out_path);
  write_adapt_log(out_path + ".adapt_log.csv", log);
  write_beta_csv(out_path + ".beta.csv", beta, partition_of(model));
  std::cout << "adapted model -> " << out_path << " (threshold " << model.threshold << ")\n";
  return 0;
}

int cmd_detect(const Common& common, const std::string& model_path, const std::string& data_path,
               const std::string& out_path, double fppi, bool fppi_given) {
  const KeyValue kv = load_config(common);
  TrainConfig cfg = train_config_from(kv);
  DpmModel model = load_model(model_path);
  const Dataset data = load_manifest(data_path);
  if (fppi_given) {
    cfg.calib_fppi = fppi;
    model.threshold = calibrate_threshold(model, data, cfg);
    std::cout << "threshold calibrated to FPPI=" << fppi << ": " << model.threshold << "\n";
  }
  std::vector<std::pair<std::string, Detection>> rows;
  for (const auto& e : data.entries) {
    for (const Detection& d : detect(load_image(e.image_path), model))
      rows.emplace_back(e.image_path, d);
  }
  write_detections_csv(out_path, rows);
  std::cout << rows.size() << " detections -> " << out_path << "\n";
  return 0;
}

int cmd_eval(const Common& common, const std::string& dets_path, const std::string& data_path,
             const std::string& out_path, const std::string& plot_path, const std::string& label) {
  const KeyValue kv = load_config(common);
  const TrainConfig cfg = train_config_from(kv);
  const Dataset data = load_manifest(data_path);
  const auto rows = read_detections_csv(dets_path);
  std::map<std::string, std::vector<Detection>> by_image;
  for (const auto& [id, det] : rows) by_image[id].push_back(det);

  std::vector<EvalInput> inputs;
  for (const auto& e : data.entries) {
    EvalInput in;
    const auto it = by_image.find(e.image_path);
    if (it != by_image.end()) in.dets = it->second;
    in.gts = e.annotations;
    inputs.push_back(std::move(in));
  }
  const FppiMrCurve c = curve(inputs, cfg.classes, cfg.moderate);
  ExperimentCurves ec;
  ec.label = label;
  ec.runs.push_back(c);
  write_curves_csv(out_path, {ec});
  if (!plot_path.empty()) write_plot_svg(plot_path, {ec});
  std::cout << label << ": log-average MR " << log_average_mr(c) << " over " << c.n_images
            << " images, " << c.n_gt << " moderate GT -> " << out_path << "\n";
  return 0;
}

int cmd_experiment(const Common& common, const std::string& out_dir, std::vector<double> xs,
                   bool mix_flag) {
  KeyValue kv = load_config(common);
  ExperimentConfig cfg;
  cfg.adapt = adapt_config_from(kv);
  cfg.out_dir = out_dir.empty() ? kv.get_string("experiment.out_dir", "experiment-out") : out_dir;
  if (xs.empty()) xs = kv.get_list("experiment.x");
  if (xs.empty()) xs = {0.1};
  cfg.xs = xs;
  cfg.run_mix = mix_flag || kv.get_bool("experiment.mix", false);
  cfg.eval_threshold = kv.get_double("experiment.eval_threshold", cfg.eval_threshold);

  cfg.source_manifest = kv.get_string("experiment.source_manifest");
  cfg.target_train_manifest = kv.get_string("experiment.target_train_manifest");
  cfg.target_test_manifest = kv.get_string("experiment.target_test_manifest");

  if (cfg.source_manifest.empty() && kv.get_bool("experiment.synth", false)) {
    const auto [src_spec, tgt_spec] = default_shift_pair();
    const int w = kv.get_int("experiment.synth.width", 224);
    const int h = kv.get_int("experiment.synth.height", 144);
    const fs::path data_dir = fs::path(cfg.out_dir) / "data";
    DomainSpec test_spec = tgt_spec;
    test_spec.seed = tgt_spec.seed + 7777;  // fresh target draw for testing
    generate(src_spec, kv.get_int("experiment.synth.n_source", 500), w, h,
             (data_dir / "source").string());
    generate(tgt_spec, kv.get_int("experiment.synth.n_target_train", 300), w, h,
             (data_dir / "target_train").string());
    generate(test_spec, kv.get_int("experiment.synth.n_target_test", 300), w, h,
             (data_dir / "target_test").string());
    cfg.source_manifest = (data_dir / "source/manifest.txt").string();
    cfg.target_train_manifest = (data_dir / "target_train/manifest.txt").string();
    cfg.target_test_manifest = (data_dir / "target_test/manifest.txt").string();
  }
  if (cfg.source_manifest.empty() || cfg.target_train_manifest.empty() ||
      cfg.target_test_manifest.empty())
    throw DataError("experiment needs source/target_train/target_test manifests (or experiment.synth = true)");

  kv.set("experiment.source_manifest", cfg.source_manifest);
  kv.set("experiment.target_train_manifest", cfg.target_train_manifest);
  kv.set("experiment.target_test_manifest", cfg.target_test_manifest);
  cfg.raw = kv;

  const ExperimentSummary summary = run_experiment(cfg);
  for (const auto& [x, entries] : summary.per_x) {
    std::cout << "X=" << x << ":\n";
    for (const auto& e : entries)
      std::cout << "  " << e.label << "  log-avg MR " << e.mean_log_avg_mr << " (" << e.runs
                << " run" << (e.runs == 1 ? "" : "s") << ")\n";
  }
  for (const auto& p : summary.plot_svgs) std::cout << "plot -> " << p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deformable part model vehicle detector with domain adaptation"};
  app.require_subcommand(1);

  Common common;

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
  std::string synth_domain = "source", synth_out = "synth-out";
  int synth_n = 100, synth_w = 224, synth_h = 144;
  std::uint64_t synth_seed = 0;
  bool synth_seed_given = false;
  synth->add_option("--domain", synth_domain, "source | target | path to a domain spec file");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "number of images");
  synth->add_option("--width", synth_w, "image width");
  synth->add_option("--height", synth_h, "image height");
  synth->add_option("--domain-seed", synth_seed, "override the domain seed")
      ->each([&](const std::string&) { synth_seed_given = true; });
  add_common(synth, common);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a DPM (SRC / TARX / TAR-ALL / MIX)");
  std::string train_data, train_mix, train_out = "model.vdpm";
  train_cmd->add_option("--data", train_data, "training manifest")->required();
  train_cmd->add_option("--mix", train_mix, "second manifest pooled in (MIX baseline)");
  train_cmd->add_option("--out", train_out, "output model file");
  add_common(train_cmd, common);

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "adapt a source model to target data");
  std::string adapt_src, adapt_data, adapt_out = "adapted.vdpm";
  double adapt_x = 1.0;
  adapt_cmd->add_option("--src-model", adapt_src, "source model file")->required();
  adapt_cmd->add_option("--data", adapt_data, "target training manifest")->required();
  adapt_cmd->add_option("--x", adapt_x, "fraction of target images to use");
  adapt_cmd->add_option("--out", adapt_out, "output model file");
  add_common(adapt_cmd, common);

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "run a model over images");
  std::string det_model, det_data, det_out = "detections.csv";
  double det_fppi = 1.0;
  bool det_fppi_given = false;
  detect_cmd->add_option("--model", det_model, "model file")->required();
  detect_cmd->add_option("--data", det_data, "manifest of images (labels used for --fppi)")->required();
  detect_cmd->add_option("--out", det_out, "detections CSV");
  detect_cmd->add_option("--fppi", det_fppi, "calibrate the threshold to this FPPI first")
      ->each([&](const std::string&) { det_fppi_given = true; });
  add_common(detect_cmd, common);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "FPPI vs miss-rate curve from detections");
  std::string eval_dets, eval_data, eval_out = "curve.csv", eval_plot, eval_label = "run";
  eval_cmd->add_option("--dets", eval_dets, "detections CSV")->required();
  eval_cmd->add_option("--data", eval_data, "manifest with ground-truth labels")->required();
  eval_cmd->add_option("--out", eval_out, "curve CSV");
  eval_cmd->add_option("--plot", eval_plot, "also write an SVG plot");
  eval_cmd->add_option("--label", eval_label, "curve label");
  add_common(eval_cmd, common);

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "run the SRC/TARX/TAR-ALL/SA-SSVM matrix");
  std::string exp_out;
  std::vector<double> exp_xs;
  bool exp_mix = false;
  exp_cmd->add_option("--out", exp_out, "output directory");
  exp_cmd->add_option("--x", exp_xs, "target fractions, e.g. --x 0.1 0.5 1.0");
  exp_cmd->add_flag("--mix", exp_mix, "also run the MIX baseline");
  add_common(exp_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth)
      return cmd_synth(common, synth_domain, synth_out, synth_n, synth_w, synth_h, synth_seed,
                       synth_seed_given);
    if (*train_cmd) return cmd_train(common, train_data, train_mix, train_out);
    if (*adapt_cmd) return cmd_adapt(common, adapt_src, adapt_data, adapt_x, adapt_out);
    if (*detect_cmd)
      return cmd_detect(common, det_model, det_data, det_out, det_fppi, det_fppi_given);
    if (*eval_cmd) return cmd_eval(common, eval_dets, eval_data, eval_out, eval_plot, eval_label);
    if (*exp_cmd) return cmd_experiment(common, exp_out, exp_xs, exp_mix);
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
