#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdpm/geometry.hpp"

namespace vdpm {

struct DatasetEntry {
  std::string image_path;
  std::string label_path;
  std::vector<Annotation> annotations;
};

struct Dataset {
  std::string name;
  std::vector<DatasetEntry> entries;
  std::uint64_t rng_seed = 0;

  int num_images() const { return static_cast<int>(entries.size()); }
};

// Image-level random subset: round(fraction*N) images, at least 1.
struct SplitSpec {
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

// Which labels are positives and which mark ignore regions. Everything else
// is plain background.
struct ClassConfig {
  std::vector<std::string> positives{"Car"};
  std::vector<std::string> ignores{"Van", "Truck", "DontCare"};
};

bool is_positive_class(const ClassConfig& cfg, const std::string& label);
bool is_ignore_class(const ClassConfig& cfg, const std::string& label);

// One KITTI object line: type truncated occluded alpha l t r b h w l x y z ry [score]
Annotation parse_kitti_label_line(const std::string& line, int line_no = 1);
std::string format_kitti_label_line(const Annotation& ann);

std::vector<Annotation> load_kitti_labels(const std::string& path);
void save_kitti_labels(const std::vector<Annotation>& anns, const std::string& path);

// Manifest: one "image_path<TAB>label_path" per line. Relative paths are
// resolved against the manifest's directory.
Dataset load_manifest(const std::string& path, const std::string& name = "");
void save_manifest(const Dataset& d, const std::string& path);

Dataset subset_images(const Dataset& d, const SplitSpec& s);

// Concatenation, used by the MIX baseline.
Dataset concat(const Dataset& a, const Dataset& b, const std::string& name);

struct DatasetStats {
  int images = 0;
  int moderate_vehicles = 0;
};

DatasetStats dataset_stats(const Dataset& d, const ClassConfig& classes = {},
                           const ModerateConfig& moderate = {});

}  // namespace vdpm
