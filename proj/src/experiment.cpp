#include "vdpm/experiment.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "vdpm/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vdpm {

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file: " + path);
  char buf[1 << 16];
  std::uint64_t h = 0xcbf29ce484222325ull;
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

std::uint64_t hash_dataset_files(const std::string& manifest_path) {
  std::uint64_t h = hash_file(manifest_path);
  const Dataset d = load_manifest(manifest_path);
  for (const auto& e : d.entries) {
    h = fnv1a64(e.image_path, h);
    h ^= hash_file(e.image_path);
    h = fnv1a64(e.label_path, h);
    h ^= hash_file(e.label_path);
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(Scalar v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

FppiMrCurve curve_from_cell_csv(const std::string& path) {
  const CsvCurves csv = read_curves_csv(path);
  if (csv.experiments.empty() || csv.experiments[0].per_run.rows() == 0)
    throw FormatError("cell eval CSV has no runs: " + path);
  FppiMrCurve c;
  for (std::size_t i = 0; i < csv.grid.size(); ++i)
    c.points.push_back({csv.grid[i], csv.experiments[0].per_run(0, static_cast<int>(i)), 0});
  return c;
}

// One trained-and-evaluated unit of the matrix, reusable across runs when
// its manifest (config + input hashes) matches.
class Cell {
 public:
  Cell(const fs::path& dir, std::string kind, std::uint64_t config_hash,
       std::map<std::string, std::uint64_t> input_hashes)
      : dir_(dir), kind_(std::move(kind)), config_hash_(config_hash),
        input_hashes_(std::move(input_hashes)) {}

  fs::path model_path() const { return dir_ / "model.vdpm"; }
  fs::path eval_path() const { return dir_ / "eval.csv"; }
  fs::path manifest_path() const { return dir_ / "manifest.json"; }
  const fs::path& dir() const { return dir_; }

  bool reusable() const {
    std::ifstream in(manifest_path());
    if (!in) return false;
    json j;
    try {
      in >> j;
    } catch (const json::exception&) {
      return false;
    }
    if (j.value("kind", "") != kind_) return false;
    if (j.value("config_hash", "") != hex64(config_hash_)) return false;
    const auto it = j.find("input_hashes");
    if (it == j.end()) return false;
    for (const auto& [name, h] : input_hashes_) {
      if (!it->contains(name) || (*it)[name] != hex64(h)) return false;
    }
    for (const auto& out : j.value("outputs", std::vector<std::string>{}))
      if (!fs::exists(dir_ / out)) return false;
    return true;
  }

  void write_manifest(const std::vector<std::string>& outputs, std::uint64_t seed) const {
    json j;
    j["kind"] = kind_;
    j["config_hash"] = hex64(config_hash_);
    j["seed"] = seed;
    j["rng"] = "splitmix64";
    json inputs;
    for (const auto& [name, h] : input_hashes_) inputs[name] = hex64(h);
    j["input_hashes"] = inputs;
    j["outputs"] = outputs;
    std::ofstream out(manifest_path());
    if (!out) throw DataError("cannot write cell manifest: " + manifest_path().string());
    out << j.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  std::string kind_;
  std::uint64_t config_hash_;
  std::map<std::string, std::uint64_t> input_hashes_;
};

void write_cell_eval(const Cell& cell, const std::string& label, const FppiMrCurve& c) {
  ExperimentCurves ec;
  ec.label = label;
  ec.runs.push_back(c);
  write_curves_csv(cell.eval_path().string(), {ec});
}

std::string x_tag(double x) {
  std::ostringstream ss;
  ss << "x" << fmt(x);
  std::string s = ss.str();
  for (auto& ch : s)
    if (ch == '.') ch = '_';
  return s;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw DataError("experiment needs an output directory");
  fs::create_directories(cfg.out_dir);

  const Dataset source = load_manifest(cfg.source_manifest, "source");
  const Dataset target_train = load_manifest(cfg.target_train_manifest, "target-train");
  const Dataset target_test = load_manifest(cfg.target_test_manifest, "target-test");

  const std::uint64_t config_hash = fnv1a64(cfg.raw.to_text());
  const std::uint64_t src_hash = hash_dataset_files(cfg.source_manifest);
  const std::uint64_t tgt_train_hash = hash_dataset_files(cfg.target_train_manifest);
  const std::uint64_t tgt_test_hash = hash_dataset_files(cfg.target_test_manifest);

  const TrainConfig& tcfg = cfg.adapt.train;
  const ClassConfig& classes = tcfg.classes;
  const ModerateConfig& moderate = tcfg.moderate;

  // top-level run manifest
  {
    json j;
    j["config_hash"] = hex64(config_hash);
    j["rng"] = "splitmix64";
    j["seed"] = cfg.adapt.seed;
    j["input_hashes"] = {{"source", hex64(src_hash)},
                         {"target_train", hex64(tgt_train_hash)},
                         {"target_test", hex64(tgt_test_hash)}};
    j["config"] = cfg.raw.to_text();
    std::ofstream out(fs::path(cfg.out_dir) / "manifest.json");
    out << j.dump(2) << "\n";
    cfg.raw.save((fs::path(cfg.out_dir) / "config.used").string());
  }

  struct CellOutcome {
    DpmModel model;
    FppiMrCurve curve;
  };

  // Trains (or reuses) one cell and always leaves model + eval curve behind.
  const auto run_train_cell = [&](const std::string& name, const Dataset& data,
                                  std::uint64_t seed,
                                  const std::map<std::string, std::uint64_t>& inputs)
      -> CellOutcome {
    Cell cell(fs::path(cfg.out_dir) / name, "train:" + name, config_hash, inputs);
    CellOutcome out;
    if (cell.reusable()) {
      out.model = load_model(cell.model_path().string());
      out.curve = curve_from_cell_csv(cell.eval_path().string());
      std::cerr << "[experiment] reusing " << name << "\n";
      return out;
    }
    std::cerr << "[experiment] training " << name << " (" << data.num_images() << " images)\n";
    fs::create_directories(cell.dir());
    TrainConfig c = tcfg;
    c.seed = seed;
    std::vector<TrainLogRow> log;
    out.model = train(data, c, &log);
    save_model(out.model, cell.model_path().string());
    write_train_log((cell.dir() / "train_log.csv").string(), log);
    out.curve = evaluate_model(out.model, target_test, cfg.eval_threshold, classes, moderate,
                               tcfg.threads);
    write_cell_eval(cell, name, out.curve);
    cell.write_manifest({"model.vdpm", "eval.csv", "train_log.csv"}, seed);
    return out;
  };

  const auto run_adapt_cell = [&](const std::string& name, const DpmModel& src_model,
                                  const Dataset& subset, std::uint64_t seed,
                                  const std::map<std::string, std::uint64_t>& inputs)
      -> CellOutcome {
    Cell cell(fs::path(cfg.out_dir) / name, "adapt:" + name, config_hash, inputs);
    CellOutcome out;
    if (cell.reusable()) {
      out.model = load_model(cell.model_path().string());
      out.curve = curve_from_cell_csv(cell.eval_path().string());
      std::cerr << "[experiment] reusing " << name << "\n";
      return out;
    }
    std::cerr << "[experiment] adapting " << name << " (" << subset.num_images() << " images)\n";
    fs::create_directories(cell.dir());
    AdaptConfig ac = cfg.adapt;
    ac.train.seed = seed;
    std::vector<AdaptLogRow> log;
    VectorX beta;
    out.model = adapt(src_model, subset, ac, &log, &beta);
    save_model(out.model, cell.model_path().string());
    write_adapt_log((cell.dir() / "adapt_log.csv").string(), log);
    write_beta_csv((cell.dir() / "beta.csv").string(), beta, partition_of(out.model));
    out.curve = evaluate_model(out.model, target_test, cfg.eval_threshold, classes, moderate,
                               tcfg.threads);
    write_cell_eval(cell, name, out.curve);
    cell.write_manifest({"model.vdpm", "eval.csv", "adapt_log.csv", "beta.csv"}, seed);
    return out;
  };

  const std::map<std::string, std::uint64_t> src_inputs{{"source", src_hash}};
  const std::map<std::string, std::uint64_t> tgt_inputs{{"target_train", tgt_train_hash}};
  std::map<std::string, std::uint64_t> mix_inputs{{"source", src_hash},
                                                  {"target_train", tgt_train_hash}};

  const CellOutcome src = run_train_cell("src", source, tcfg.seed, src_inputs);
  const CellOutcome tar_all = run_train_cell("tar_all", target_train, tcfg.seed, tgt_inputs);
  CellOutcome mix;
  if (cfg.run_mix)
    mix = run_train_cell("mix", concat(source, target_train, "mix"), tcfg.seed, mix_inputs);

  ExperimentSummary summary;
  for (const double x : cfg.xs) {
    std::vector<ExperimentCurves> figure;
    figure.push_back({"SRC", {src.curve}});

    ExperimentCurves tarx;
    {
      std::ostringstream label;
      label << "TAR" << fmt(x);
      tarx.label = label.str();
    }
    ExperimentCurves sa;
    sa.label = "SA-SSVM";
    for (int r = 0; r < cfg.adapt.repetitions; ++r) {
      const std::uint64_t seed = cfg.adapt.seed + static_cast<std::uint64_t>(r);
      const Dataset subset = subset_images(target_train, {x, seed});
      std::ostringstream suffix;
      suffix << x_tag(x) << "/seed" << seed;
      const CellOutcome t =
          run_train_cell("tarx_" + suffix.str(), subset, seed, tgt_inputs);
      tarx.runs.push_back(t.curve);
      const CellOutcome a = run_adapt_cell("sa_" + suffix.str(), src.model, subset, seed,
                                           mix_inputs);
      sa.runs.push_back(a.curve);
    }
    figure.push_back(tarx);
    figure.push_back({"TAR-ALL", {tar_all.curve}});
    figure.push_back(sa);
    if (cfg.run_mix) figure.push_back({"MIX", {mix.curve}});

    const std::string csv_path =
        (fs::path(cfg.out_dir) / ("curves_" + x_tag(x) + ".csv")).string();
    const std::string svg_path = (fs::path(cfg.out_dir) / ("plot_" + x_tag(x) + ".svg")).string();
    write_curves_csv(csv_path, figure);
    write_plot_svg(svg_path, figure, "synthetic domain shift, X=" + fmt(x));
    summary.curve_csvs.push_back(csv_path);
    summary.plot_svgs.push_back(svg_path);

    std::vector<ExperimentEntry> entries;
    for (const ExperimentCurves& ec : figure) {
      ExperimentEntry e;
      e.label = ec.label;
      e.runs = static_cast<int>(ec.runs.size());
      const AggregateCurves agg = aggregate(ec.runs);
      e.mean_log_avg_mr = log_average_mr(mean_curve(agg));
      for (const FppiMrCurve& run : ec.runs) e.run_log_avg_mr.push_back(log_average_mr(run));
      entries.push_back(std::move(e));
    }
    summary.per_x[x] = std::move(entries);
  }
  return summary;
}

}  // namespace vdpm
