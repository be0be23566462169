#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vdpm/dataset.hpp"
#include "vdpm/image.hpp"
#include "vdpm/rng.hpp"

namespace vdpm {

// Knobs for one synthetic domain: glyph appearance, clutter, pose
// distribution and global imaging (blur/gain/gamma). The shift between the
// frozen source/target pair lives entirely in these values.
struct DomainSpec {
  std::string name = "custom";
  std::string version = "v1";
  double body_shade = 180;
  double body_shade_spread = 20;
  double wheel_contrast = 70;
  double windshield_lift = 35;
  double edge_blur_sigma = 0;
  double distractor_density = 3;
  double noise_amp = 5;
  double aspect_mean = 2.0;
  double aspect_spread = 0.15;
  double height_min = 48;
  double height_max = 92;
  double gain = 1.0;
  double gamma = 1.0;
  int max_objects = 3;
  std::uint64_t seed = 0;
};

struct RenderedScene {
  Image image;
  std::vector<Annotation> annotations;
};

// Deterministic given the rng state. Labels are exact: bbox is the clipped
// body extent, truncation the clipped-away fraction, occlusion from overlap
// with later-drawn vehicles (placement rejects coverage that would exceed
// the moderate range).
RenderedScene render_scene(const DomainSpec& spec, int width, int height, Rng rng);

// Renders n_images scenes into out_dir (images/, labels/, manifest.txt and
// the domain spec file) and returns the loaded dataset.
Dataset generate(const DomainSpec& spec, int n_images, int width, int height,
                 const std::string& out_dir);

// Frozen source/target pair: the source is sharp, bright and wide-aspect;
// the target is blurred, noisier, darker (gamma 0.8) and narrower.
std::pair<DomainSpec, DomainSpec> default_shift_pair();

void write_domain_spec(const DomainSpec& spec, const std::string& path);
DomainSpec read_domain_spec(const std::string& path);

}  // namespace vdpm
