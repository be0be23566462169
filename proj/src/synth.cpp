#include "vdpm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vdpm/config.hpp"
#include "vdpm/errors.hpp"
#include "vdpm/geometry.hpp"

namespace fs = std::filesystem;

namespace vdpm {

namespace {

void fill_rect(Image& img, const BBox& box, Scalar shade) {
  const int x0 = std::max(0, static_cast<int>(std::lround(box.left)));
  const int x1 = std::min<int>(static_cast<int>(img.cols()), static_cast<int>(std::lround(box.right)));
  const int y0 = std::max(0, static_cast<int>(std::lround(box.top)));
  const int y1 = std::min<int>(static_cast<int>(img.rows()), static_cast<int>(std::lround(box.bottom)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img(y, x) = shade;
}

void stamp_owner(IntGrid& owner, const BBox& box, int id) {
  const int x0 = std::max(0, static_cast<int>(std::lround(box.left)));
  const int x1 = std::min<int>(static_cast<int>(owner.cols()), static_cast<int>(std::lround(box.right)));
  const int y0 = std::max(0, static_cast<int>(std::lround(box.top)));
  const int y1 = std::min<int>(static_cast<int>(owner.rows()), static_cast<int>(std::lround(box.bottom)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) owner(y, x) = id;
}

// body rectangle, two darker wheel squares, lighter windshield band
void draw_vehicle(Image& img, const BBox& b, Scalar body, Scalar wheel, Scalar shield) {
  fill_rect(img, b, body);
  const Scalar h = b.height(), w = b.width();
  const Scalar ws = 0.28 * h;
  fill_rect(img, BBox(b.left + 0.10 * w, b.bottom - ws, b.left + 0.10 * w + ws, b.bottom), wheel);
  fill_rect(img, BBox(b.right - 0.10 * w - ws, b.bottom - ws, b.right - 0.10 * w, b.bottom), wheel);
  fill_rect(img, BBox(b.left + 0.18 * w, b.top + 0.12 * h, b.right - 0.18 * w, b.top + 0.34 * h),
            shield);
}

}  // namespace

RenderedScene render_scene(const DomainSpec& spec, int width, int height, Rng rng) {
  RenderedScene scene;
  Image& img = scene.image;
  img.resize(height, width);

  // textured background with a mild vertical ramp
  const Scalar base = rng.uniform(60, 110);
  const Scalar ramp = rng.uniform(0, 25);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      img(y, x) = base + ramp * y / height + spec.noise_amp * rng.normal();

  const int n_distract = rng.below_int(static_cast<int>(2 * spec.distractor_density) + 1);
  for (int i = 0; i < n_distract; ++i) {
    const Scalar w = rng.uniform(10, 60);
    const Scalar h = rng.uniform(10, 60);
    const Scalar left = rng.uniform(-w / 2, width - w / 2);
    const Scalar top = rng.uniform(-h / 2, height - h / 2);
    fill_rect(img, BBox(left, top, left + w, top + h), rng.uniform(40, 200));
  }

  struct Placed {
    BBox clipped;
    Scalar truncation;
    Scalar body, wheel, shield;
  };
  std::vector<Placed> placed;
  const int wanted = 1 + rng.below_int(std::max(1, spec.max_objects));
  for (int v = 0; v < wanted; ++v) {
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      const Scalar h = rng.uniform(spec.height_min, spec.height_max);
      const Scalar aspect =
          std::clamp(spec.aspect_mean + spec.aspect_spread * rng.normal(), 1.2, 3.2);
      const Scalar w = aspect * h;
      const Scalar cx = rng.uniform(0, width);
      const Scalar cy = rng.uniform(0.35 * height, 0.88 * height);
      const BBox full(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2);
      BBox clipped;
      try {
        clipped = clip_to_image(full, width, height);
      } catch (const EmptyAfterClip&) {
        continue;
      }
      const Scalar trunc = 1 - clipped.area() / full.area();
      if (trunc > 0.6) continue;
      // this glyph is drawn on top; keep earlier vehicles at most partially occluded
      bool covers_too_much = false;
      for (const Placed& p : placed)
        if (intersection_area(clipped, p.clipped) / p.clipped.area() > 0.4) covers_too_much = true;
      if (covers_too_much) continue;

      Placed pl;
      pl.clipped = clipped;
      pl.truncation = trunc;
      pl.body = std::clamp(spec.body_shade + spec.body_shade_spread * rng.normal(), 30.0, 235.0);
      pl.wheel = std::clamp(pl.body - spec.wheel_contrast, 0.0, 255.0);
      pl.shield = std::clamp(pl.body + spec.windshield_lift, 0.0, 255.0);
      placed.push_back(pl);
      ok = true;
    }
    if (!ok) std::cerr << "warning: synth placement failed after retries\n";
  }

  IntGrid owner(height, width);
  owner.setConstant(-1);
  for (std::size_t i = 0; i < placed.size(); ++i) {
    draw_vehicle(img, placed[i].clipped, placed[i].body, placed[i].wheel, placed[i].shield);
    stamp_owner(owner, placed[i].clipped, static_cast<int>(i));
  }

  for (std::size_t i = 0; i < placed.size(); ++i) {
    const BBox& b = placed[i].clipped;
    const int x0 = static_cast<int>(std::lround(b.left));
    const int x1 = std::min<int>(width, static_cast<int>(std::lround(b.right)));
    const int y0 = static_cast<int>(std::lround(b.top));
    const int y1 = std::min<int>(height, static_cast<int>(std::lround(b.bottom)));
    int visible = 0, total = 0;
    for (int y = std::max(0, y0); y < y1; ++y)
      for (int x = std::max(0, x0); x < x1; ++x) {
        ++total;
        if (owner(y, x) == static_cast<int>(i)) ++visible;
      }
    const Scalar covered = total ? 1 - static_cast<Scalar>(visible) / total : 0;

    Annotation ann;
    ann.class_label = "Car";
    ann.bbox = b;
    ann.truncation = placed[i].truncation;
    ann.occlusion = covered < 0.05 ? Occlusion::none
                                   : (covered < 0.5 ? Occlusion::partial : Occlusion::heavy);
    scene.annotations.push_back(std::move(ann));
  }

  if (spec.edge_blur_sigma > 0) img = gaussian_blur(img, spec.edge_blur_sigma);
  if (spec.gain != 1 || spec.gamma != 1) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const Scalar v = std::clamp<Scalar>(spec.gain * img(y, x) / 255, 0, 1);
        img(y, x) = 255 * std::pow(v, spec.gamma);
      }
  } else {
    img = img.min(255.0).max(0.0);
  }
  return scene;
}

Dataset generate(const DomainSpec& spec, int n_images, int width, int height,
                 const std::string& out_dir) {
  if (n_images < 1) throw DataError("n_images must be >= 1");
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "labels");

  Dataset d;
  d.name = spec.name;
  d.rng_seed = spec.seed;
  const Rng master(spec.seed);

  std::string manifest;
  for (int i = 0; i < n_images; ++i) {
    const RenderedScene scene =
        render_scene(spec, width, height, master.fork("image").fork(static_cast<std::uint64_t>(i)));
    char id[16];
    std::snprintf(id, sizeof(id), "%06d", i);
    const std::string img_rel = std::string("images/") + id + ".pgm";
    const std::string lab_rel = std::string("labels/") + id + ".txt";
    const std::string img_path = (fs::path(out_dir) / img_rel).string();
    const std::string lab_path = (fs::path(out_dir) / lab_rel).string();
    save_pgm(scene.image, img_path);
    save_kitti_labels(scene.annotations, lab_path);
    manifest += img_rel + "\t" + lab_rel + "\n";

    DatasetEntry e;
    e.image_path = img_path;
    e.label_path = lab_path;
    e.annotations = scene.annotations;
    for (auto& a : e.annotations) a.source_image = img_path;
    d.entries.push_back(std::move(e));
  }

  std::ofstream mf((fs::path(out_dir) / "manifest.txt").string());
  if (!mf) throw DataError("cannot write manifest in " + out_dir);
  mf << manifest;
  write_domain_spec(spec, (fs::path(out_dir) / "domain.spec").string());
  return d;
}

std::pair<DomainSpec, DomainSpec> default_shift_pair() {
  DomainSpec source;
  source.name = "synth-source";
  source.version = "shift-pair-v1";
  source.body_shade = 190;
  source.body_shade_spread = 18;
  source.wheel_contrast = 80;
  source.windshield_lift = 40;
  source.edge_blur_sigma = 0.4;
  source.distractor_density = 2.5;
  source.noise_amp = 4;
  source.aspect_mean = 1.95;
  source.aspect_spread = 0.22;
  source.height_min = 48;
  source.height_max = 92;
  source.gain = 1.0;
  source.gamma = 1.0;
  source.max_objects = 3;
  source.seed = 101;

  DomainSpec target = source;
  target.name = "synth-target";
  target.body_shade = 150;
  target.body_shade_spread = 28;
  target.wheel_contrast = 55;
  target.windshield_lift = 28;
  target.edge_blur_sigma = 1.2;
  target.distractor_density = 5;
  target.noise_amp = 9;
  target.aspect_mean = 1.60;
  target.aspect_spread = 0.22;
  target.gain = 0.95;
  target.gamma = 0.8;
  target.seed = 202;
  return {source, target};
}

void write_domain_spec(const DomainSpec& spec, const std::string& path) {
  domain_spec_to_keyvalue(spec).save(path);
}

DomainSpec read_domain_spec(const std::string& path) {
  return domain_spec_from(KeyValue::load(path));
}

}  // namespace vdpm
