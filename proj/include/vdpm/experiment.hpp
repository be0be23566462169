#pragma once

#include <map>
#include <string>
#include <vector>

#include "vdpm/adapt.hpp"
#include "vdpm/config.hpp"
#include "vdpm/synth.hpp"

namespace vdpm {

// The SRC / TARX / TAR-ALL / SA-SSVM (/ MIX) matrix over a list of X values.
struct ExperimentConfig {
  std::string source_manifest;
  std::string target_train_manifest;
  std::string target_test_manifest;
  std::vector<double> xs{0.1};
  bool run_mix = false;
  Scalar eval_threshold = -1.0;
  std::string out_dir;
  AdaptConfig adapt;  // adapt.train carries the shared training knobs
  KeyValue raw;       // canonical config text, hashed into run manifests
};

struct ExperimentEntry {
  std::string label;
  int runs = 0;
  double mean_log_avg_mr = 1.0;
  std::vector<double> run_log_avg_mr;
};

struct ExperimentSummary {
  // key: X value; SRC/TAR-ALL/MIX entries are replicated per X
  std::map<double, std::vector<ExperimentEntry>> per_x;
  std::vector<std::string> curve_csvs;
  std::vector<std::string> plot_svgs;
};

ExperimentSummary run_experiment(const ExperimentConfig& cfg);

std::uint64_t hash_file(const std::string& path);
std::uint64_t hash_dataset_files(const std::string& manifest_path);

}  // namespace vdpm
