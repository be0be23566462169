#include "vdpm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vdpm/errors.hpp"
#include "vdpm/rng.hpp"

namespace fs = std::filesystem;

namespace vdpm {

namespace {

Scalar parse_number(const std::string& tok, int line_no, const char* what) {
  Scalar v;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(std::string("non-numeric ") + what + " '" + tok + "'", line_no);
  return v;
}

std::string format_number(Scalar v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

bool is_positive_class(const ClassConfig& cfg, const std::string& label) {
  return std::find(cfg.positives.begin(), cfg.positives.end(), label) != cfg.positives.end();
}

bool is_ignore_class(const ClassConfig& cfg, const std::string& label) {
  return std::find(cfg.ignores.begin(), cfg.ignores.end(), label) != cfg.ignores.end();
}

Annotation parse_kitti_label_line(const std::string& line, int line_no) {
  std::istringstream ss(line);
  std::vector<std::string> tok;
  std::string t;
  while (ss >> t) tok.push_back(t);
  if (tok.size() < 15) throw ParseError("expected >= 15 fields, got " + std::to_string(tok.size()), line_no);

  Annotation ann;
  ann.class_label = tok[0];
  ann.truncation = parse_number(tok[1], line_no, "truncation");
  const Scalar occ = parse_number(tok[2], line_no, "occlusion");
  if (occ == 0)
    ann.occlusion = Occlusion::none;
  else if (occ == 1)
    ann.occlusion = Occlusion::partial;
  else
    ann.occlusion = Occlusion::heavy;  // 2, 3 ("unknown") and -1 all excluded from moderate

  const Scalar l = parse_number(tok[4], line_no, "bbox.left");
  const Scalar tp = parse_number(tok[5], line_no, "bbox.top");
  const Scalar r = parse_number(tok[6], line_no, "bbox.right");
  const Scalar b = parse_number(tok[7], line_no, "bbox.bottom");
  if (!(r > l) || !(b > tp)) throw ParseError("degenerate bbox", line_no);
  ann.bbox = BBox(l, tp, r, b);

  ann.extras.reserve(tok.size() - 7);
  ann.extras.push_back(parse_number(tok[3], line_no, "alpha"));
  for (std::size_t i = 8; i < tok.size(); ++i)
    ann.extras.push_back(parse_number(tok[i], line_no, "field"));
  return ann;
}

std::string format_kitti_label_line(const Annotation& ann) {
  std::ostringstream out;
  out << ann.class_label << ' ' << format_number(ann.truncation) << ' '
      << static_cast<int>(ann.occlusion) << ' ';
  out << format_number(ann.extras.empty() ? Scalar(-10) : ann.extras[0]);
  out << ' ' << format_number(ann.bbox.left) << ' ' << format_number(ann.bbox.top) << ' '
      << format_number(ann.bbox.right) << ' ' << format_number(ann.bbox.bottom);
  // dims(3) loc(3) rot_y, padded with KITTI's "unknown" markers when absent
  for (std::size_t i = 1; i < 8; ++i) {
    const Scalar v = i < ann.extras.size() ? ann.extras[i] : (i < 4 ? Scalar(-1) : (i < 7 ? Scalar(-1000) : Scalar(-10)));
    out << ' ' << format_number(v);
  }
  for (std::size_t i = 8; i < ann.extras.size(); ++i) out << ' ' << format_number(ann.extras[i]);
  return out.str();
}

std::vector<Annotation> load_kitti_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file: " + path);
  std::vector<Annotation> anns;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    anns.push_back(parse_kitti_label_line(line, line_no));
  }
  return anns;
}

void save_kitti_labels(const std::vector<Annotation>& anns, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write label file: " + path);
  for (const auto& a : anns) out << format_kitti_label_line(a) << '\n';
}

Dataset load_manifest(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  Dataset d;
  d.name = name.empty() ? fs::path(path).stem().string() : name;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("manifest line needs image<TAB>label", line_no);
    DatasetEntry e;
    auto resolve = [&](std::string p) {
      fs::path fp(p);
      return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    e.image_path = resolve(line.substr(0, tab));
    e.label_path = resolve(line.substr(tab + 1));
    e.annotations = load_kitti_labels(e.label_path);
    for (auto& a : e.annotations) a.source_image = e.image_path;
    d.entries.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < d.entries.size(); ++i)
    for (std::size_t j = i + 1; j < d.entries.size(); ++j)
      if (d.entries[i].image_path == d.entries[j].image_path)
        throw DataError("duplicate image in manifest: " + d.entries[i].image_path);
  return d;
}

void save_manifest(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  for (const auto& e : d.entries) out << e.image_path << '\t' << e.label_path << '\n';
}

Dataset subset_images(const Dataset& d, const SplitSpec& s) {
  if (d.entries.empty()) throw DataTooSmall("subset of empty dataset");
  const int n = d.num_images();
  int k = static_cast<int>(std::lround(s.fraction * n));
  k = std::clamp(k, 1, n);

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng(s.seed).fork("subset");
  // partial Fisher-Yates: first k entries are a uniform sample
  for (int i = 0; i < k; ++i) {
    const int j = i + rng.below_int(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());  // keep original image order

  Dataset out;
  out.name = d.name;
  out.rng_seed = s.seed;
  out.entries.reserve(k);
  for (const int i : idx) out.entries.push_back(d.entries[i]);
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b, const std::string& name) {
  Dataset out = a;
  out.name = name;
  out.entries.insert(out.entries.end(), b.entries.begin(), b.entries.end());
  return out;
}

DatasetStats dataset_stats(const Dataset& d, const ClassConfig& classes,
                           const ModerateConfig& moderate) {
  DatasetStats st;
  st.images = d.num_images();
  for (const auto& e : d.entries)
    for (const auto& a : e.annotations)
      if (is_positive_class(classes, a.class_label) && is_moderate(a, moderate))
        ++st.moderate_vehicles;
  return st;
}

}  // namespace vdpm
