#include "vdpm/adapt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>

namespace vdpm {

Scalar adapt_objective(const VectorX& w, const VectorX& beta, const AdaptationProblem& p) {
  if (w.size() != p.w_source.size() || beta.size() != p.partition.num_blocks())
    throw LayoutError("adapt objective shape mismatch");
  Scalar reg = 0;
  for (int b = 0; b < p.partition.num_blocks(); ++b) {
    const Block& blk = p.partition.blocks[b];
    reg += (w.segment(blk.offset, blk.size) - beta(b) * p.w_source.segment(blk.offset, blk.size))
               .squaredNorm();
  }
  Scalar loss = 0;
  for (const HingeSample& s : p.samples) loss += std::max(Scalar(0), 1 - s.y * dot_block(w, s));
  return Scalar(0.5) * reg + Scalar(0.5) * p.gamma * beta.squaredNorm() + p.C * loss;
}

VectorX adapt_subgradient_w(const VectorX& w, const VectorX& beta, const AdaptationProblem& p) {
  VectorX g = w - scaled_source(p.w_source, p.partition, beta);
  for (const HingeSample& s : p.samples) {
    if (s.y * dot_block(w, s) < 1) g.segment(s.offset, s.phi.size()) -= (p.C * s.y) * s.phi;
  }
  return g;
}

VectorX adapt_gradient_beta(const VectorX& w, const VectorX& beta, const AdaptationProblem& p) {
  VectorX g(p.partition.num_blocks());
  for (int b = 0; b < p.partition.num_blocks(); ++b) {
    const Block& blk = p.partition.blocks[b];
    const auto ws = p.w_source.segment(blk.offset, blk.size);
    g(b) = p.gamma * beta(b) - ws.dot(w.segment(blk.offset, blk.size) - beta(b) * ws);
  }
  return g;
}

VectorX scaled_source(const VectorX& w_source, const StructurePartition& part, const VectorX& beta) {
  VectorX m(w_source.size());
  for (int b = 0; b < part.num_blocks(); ++b) {
    const Block& blk = part.blocks[b];
    m.segment(blk.offset, blk.size) = beta(b) * w_source.segment(blk.offset, blk.size);
  }
  return m;
}

VectorX beta_closed_form(const VectorX& w, const VectorX& w_source, const StructurePartition& part,
                         Scalar gamma) {
  if (w.size() != part.total_size || w_source.size() != part.total_size)
    throw LayoutError("beta_closed_form shape mismatch");
  VectorX beta(part.num_blocks());
  for (int b = 0; b < part.num_blocks(); ++b) {
    const Block& blk = part.blocks[b];
    const auto ws = w_source.segment(blk.offset, blk.size);
    const Scalar denom = ws.squaredNorm() + gamma;
    if (denom <= 0)
      throw SingularBlock("zero-norm source block " + std::to_string(b) + " with gamma=0");
    beta(b) = w.segment(blk.offset, blk.size).dot(ws) / denom;
  }
  return beta;
}

DpmModel adapt(const DpmModel& src, const Dataset& target, const AdaptConfig& cfg,
               std::vector<AdaptLogRow>* log, VectorX* beta_out) {
  if (target.entries.empty()) throw DataTooSmall("empty target dataset");
  TrainConfig tcfg = cfg.train;
  tcfg.C = cfg.C;

  const int n_calib = static_cast<int>(std::floor(tcfg.calib_fraction * target.num_images()));
  Dataset train_part, calib_part;
  train_part.name = target.name;
  calib_part.name = target.name + "-calib";
  for (int i = 0; i < target.num_images(); ++i)
    (i < target.num_images() - n_calib ? train_part : calib_part).entries.push_back(target.entries[i]);

  auto [w_source, partition] = vectorize(src);
  VectorX w = w_source;
  VectorX beta = VectorX::Ones(partition.num_blocks());
  DpmModel model = src;
  const std::vector<LowerBound> bounds = deformation_bounds(src, tcfg.deform_quad_floor);
  Rng rng(tcfg.seed);

  for (int round = 1; round <= tcfg.relabel_rounds; ++round) {
    std::vector<LatentAssignment> assignments = latent_relabel(model, train_part, tcfg);
    std::vector<HingeSample> samples;
    int dropped = 0;
    for (LatentAssignment& la : assignments) {
      if (!la.placed) {
        ++dropped;
        continue;
      }
      HingeSample s;
      s.component = la.component;
      s.offset = component_block_offset(model, la.component);
      s.phi = std::move(la.phi);
      s.y = 1;
      samples.push_back(std::move(s));
    }
    if (dropped)
      std::cerr << "warning: adapt round " << round << ": " << dropped
                << " positives unplaceable\n";
    if (samples.empty()) throw DataTooSmall("no placeable target positives");

    std::vector<HingeSample> negs = mine_hard_negatives(model, train_part, tcfg);
    const int n_neg = static_cast<int>(negs.size());
    std::move(negs.begin(), negs.end(), std::back_inserter(samples));

    AdaptationProblem problem;
    problem.w_source = w_source;
    problem.partition = partition;
    problem.gamma = cfg.gamma;
    problem.C = cfg.C;
    problem.samples = std::move(samples);

    for (int alt = 1; alt <= cfg.alternations; ++alt) {
      const VectorX prior = scaled_source(w_source, partition, beta);
      w = ssvm_sgd(w, &prior, problem.samples, cfg.C, tcfg.sgd,
                   rng.fork("adapt-sgd").fork(static_cast<std::uint64_t>(round) * 100 + alt),
                   bounds);
      beta = beta_closed_form(w, w_source, partition, cfg.gamma);
    }
    model = devectorize(w, partition, src);

    if (log) {
      AdaptLogRow row;
      row.round = round;
      row.objective = adapt_objective(w, beta, problem);
      row.beta_norm = beta.norm();
      row.beta_min = beta.minCoeff();
      row.beta_max = beta.maxCoeff();
      row.n_neg = n_neg;
      log->push_back(row);
    }
  }

  model.threshold =
      calibrate_threshold(model, calib_part.entries.empty() ? train_part : calib_part, tcfg);
  if (beta_out) *beta_out = beta;
  return model;
}

std::vector<RepetitionResult> run_repetitions(const DpmModel& src, const Dataset& target_train,
                                              const Dataset& target_test, double x_fraction,
                                              const AdaptConfig& cfg, Scalar eval_threshold) {
  if (!(x_fraction > 0) || x_fraction > 1) throw DataError("X must be in (0,1]");
  std::vector<RepetitionResult> out;
  for (int r = 0; r < cfg.repetitions; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    SplitSpec split{x_fraction, seed};
    const Dataset subset = subset_images(target_train, split);
    AdaptConfig rep_cfg = cfg;
    rep_cfg.train.seed = seed;
    RepetitionResult res;
    res.seed = seed;
    res.model = adapt(src, subset, rep_cfg, nullptr, &res.beta);
    res.curve = evaluate_model(res.model, target_test, eval_threshold, cfg.train.classes,
                               cfg.train.moderate, cfg.train.threads);
    out.push_back(std::move(res));
  }
  return out;
}

namespace {

std::string fmt(Scalar v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_adapt_log(const std::string& path, const std::vector<AdaptLogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write adaptation log: " + path);
  out << "round,objective,beta_norm,beta_min,beta_max,n_neg\n";
  for (const AdaptLogRow& r : rows)
    out << r.round << ',' << fmt(r.objective) << ',' << fmt(r.beta_norm) << ',' << fmt(r.beta_min)
        << ',' << fmt(r.beta_max) << ',' << r.n_neg << '\n';
}

void write_beta_csv(const std::string& path, const VectorX& beta, const StructurePartition& part) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write beta: " + path);
  out << "block,component,part,kind,beta\n";
  for (int b = 0; b < part.num_blocks(); ++b) {
    const Block& blk = part.blocks[b];
    out << b << ',' << blk.component << ',' << blk.part << ','
        << (blk.kind == BlockKind::RootAppearance ? "root" : "part") << ',' << fmt(beta(b)) << '\n';
  }
}

}  // namespace vdpm
