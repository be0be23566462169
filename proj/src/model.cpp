#include "vdpm/model.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vdpm/errors.hpp"

namespace vdpm {

int DpmModel::min_root_rows() const {
  int r = 3;
  for (std::size_t i = 0; i < components.size(); ++i)
    r = i == 0 ? components[i].root_rows() : std::min(r, components[i].root_rows());
  return components.empty() ? 3 : r;
}

int DpmModel::min_root_cols() const {
  int c = 3;
  for (std::size_t i = 0; i < components.size(); ++i)
    c = i == 0 ? components[i].root_cols : std::min(c, components[i].root_cols);
  return components.empty() ? 3 : c;
}

StructurePartition partition_of(const DpmModel& m) {
  StructurePartition part;
  int offset = 0;
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    const Component& comp = m.components[c];
    Block root;
    root.offset = offset;
    root.size = static_cast<int>(comp.root.size()) + 1;  // + bias
    root.kind = BlockKind::RootAppearance;
    root.component = static_cast<int>(c);
    part.blocks.push_back(root);
    offset += root.size;
    for (std::size_t p = 0; p < comp.parts.size(); ++p) {
      Block blk;
      blk.offset = offset;
      blk.size = static_cast<int>(comp.parts[p].filter.size()) + 4;
      blk.kind = BlockKind::PartAppearanceDeformation;
      blk.component = static_cast<int>(c);
      blk.part = static_cast<int>(p);
      part.blocks.push_back(blk);
      offset += blk.size;
    }
  }
  part.total_size = offset;
  return part;
}

std::pair<VectorX, StructurePartition> vectorize(const DpmModel& m) {
  const StructurePartition part = partition_of(m);
  VectorX w(part.total_size);
  int o = 0;
  for (const Component& comp : m.components) {
    const auto n = comp.root.size();
    w.segment(o, n) = Eigen::Map<const VectorX>(comp.root.data(), n);
    o += static_cast<int>(n);
    w(o++) = comp.bias;
    for (const PartSpec& p : comp.parts) {
      const auto np = p.filter.size();
      w.segment(o, np) = Eigen::Map<const VectorX>(p.filter.data(), np);
      o += static_cast<int>(np);
      w.segment<4>(o) = p.deform;
      o += 4;
    }
  }
  return {std::move(w), part};
}

DpmModel devectorize(const VectorX& w, const StructurePartition& partition, const DpmModel& templ) {
  if (w.size() != partition.total_size)
    throw LayoutError("vector length " + std::to_string(w.size()) + " != layout size " +
                      std::to_string(partition.total_size));
  const StructurePartition own = partition_of(templ);
  if (own.total_size != partition.total_size || own.blocks.size() != partition.blocks.size())
    throw LayoutError("partition does not match template model");

  DpmModel out = templ;
  int o = 0;
  for (Component& comp : out.components) {
    const auto n = comp.root.size();
    Eigen::Map<VectorX>(comp.root.data(), n) = w.segment(o, n);
    o += static_cast<int>(n);
    comp.bias = w(o++);
    for (PartSpec& p : comp.parts) {
      const auto np = p.filter.size();
      Eigen::Map<VectorX>(p.filter.data(), np) = w.segment(o, np);
      o += static_cast<int>(np);
      p.deform = w.segment<4>(o);
      o += 4;
    }
  }
  return out;
}

DpmModel devectorize(const VectorX& w, const DpmModel& templ) {
  return devectorize(w, partition_of(templ), templ);
}

namespace {

constexpr char kMagic[4] = {'V', 'D', 'P', 'M'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_tag(std::ostream& out, const char tag[4]) { out.write(tag, 4); }

template <class T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw FormatError("truncated model file");
  return v;
}

void expect_tag(std::istream& in, const char* tag) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, tag, 4) != 0) throw FormatError(std::string("missing section ") + tag);
}

void put_matrix(std::ostream& out, const MatrixRM& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
}

MatrixRM get_matrix(std::istream& in) {
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    throw FormatError("bad matrix dims in model file");
  MatrixRM m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
  if (!in) throw FormatError("truncated model file");
  return m;
}

}  // namespace

void save_model(const DpmModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model: " + path);
  put_tag(out, kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.components.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.feature_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.hog.cell_size));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.hog.interval));
  put<Scalar>(out, m.threshold);
  for (const Component& comp : m.components) {
    put_tag(out, "COMP");
    put_matrix(out, comp.root);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(comp.root_cols));
    put<Scalar>(out, comp.bias);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(comp.parts.size()));
    for (const PartSpec& p : comp.parts) {
      put_tag(out, "PART");
      put_matrix(out, p.filter);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p.cols));
      put<std::int32_t>(out, p.anchor_x);
      put<std::int32_t>(out, p.anchor_y);
      for (int i = 0; i < 4; ++i) put<Scalar>(out, p.deform(i));
    }
  }
  put_tag(out, "END ");
  if (!out) throw DataError("short write: " + path);
}

DpmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a model file: " + path);
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw FormatError("unsupported model version " + std::to_string(version));

  DpmModel m;
  const auto ncomp = get<std::uint32_t>(in);
  m.feature_dim = static_cast<int>(get<std::uint32_t>(in));
  m.hog.cell_size = static_cast<int>(get<std::uint32_t>(in));
  m.hog.interval = static_cast<int>(get<std::uint32_t>(in));
  m.threshold = get<Scalar>(in);
  if (ncomp == 0 || ncomp > 1024) throw FormatError("bad component count");
  m.components.resize(ncomp);
  for (Component& comp : m.components) {
    expect_tag(in, "COMP");
    comp.root = get_matrix(in);
    comp.root_cols = static_cast<int>(get<std::uint32_t>(in));
    comp.bias = get<Scalar>(in);
    const auto nparts = get<std::uint32_t>(in);
    if (nparts > 1024) throw FormatError("bad part count");
    comp.parts.resize(nparts);
    for (PartSpec& p : comp.parts) {
      expect_tag(in, "PART");
      p.filter = get_matrix(in);
      p.cols = static_cast<int>(get<std::uint32_t>(in));
      p.anchor_x = get<std::int32_t>(in);
      p.anchor_y = get<std::int32_t>(in);
      for (int i = 0; i < 4; ++i) p.deform(i) = get<Scalar>(in);
    }
  }
  expect_tag(in, "END ");
  return m;
}

DpmModel flip_model(const DpmModel& m) {
  DpmModel out = m;
  for (Component& comp : out.components) {
    comp.root = flip_filter(comp.root, comp.root_cols, m.feature_dim);
    for (PartSpec& p : comp.parts) {
      p.filter = flip_filter(p.filter, p.cols, m.feature_dim);
      // anchors are relative to the doubled root, whose width is 2*root_cols
      p.anchor_x = 2 * comp.root_cols - p.cols - p.anchor_x;
    }
  }
  return out;
}

std::vector<LowerBound> deformation_bounds(const DpmModel& m, Scalar quad_floor) {
  std::vector<LowerBound> bounds;
  const StructurePartition part = partition_of(m);
  for (const Block& blk : part.blocks) {
    if (blk.kind != BlockKind::PartAppearanceDeformation) continue;
    const int d = blk.offset + blk.size - 4;
    bounds.push_back({d + 0, 0});
    bounds.push_back({d + 1, 0});
    bounds.push_back({d + 2, quad_floor});
    bounds.push_back({d + 3, quad_floor});
  }
  return bounds;
}

}  // namespace vdpm
