#pragma once

#include "vdpm/eval.hpp"
#include "vdpm/train.hpp"

namespace vdpm {

struct AdaptConfig {
  double gamma = 0.08;
  double C = 0.001;
  int repetitions = 3;
  std::uint64_t seed = 1;  // repetition r uses seed + r
  int alternations = 2;    // (SGD on w, closed-form beta) pairs per round
  TrainConfig train;       // shared latent-loop knobs; C is kept in sync
};

// Source decomposition plus the target hinge samples of the current round.
struct AdaptationProblem {
  VectorX w_source;
  StructurePartition partition;
  std::vector<HingeSample> samples;
  Scalar gamma = 0.08;
  Scalar C = 0.001;
};

// J = 0.5*sum_p ||w_p - beta_p*wS_p||^2 + 0.5*gamma*||beta||^2
//     + C*sum_i max(0, 1 - y_i*(w.phi_i))
Scalar adapt_objective(const VectorX& w, const VectorX& beta, const AdaptationProblem& p);
VectorX adapt_subgradient_w(const VectorX& w, const VectorX& beta, const AdaptationProblem& p);
VectorX adapt_gradient_beta(const VectorX& w, const VectorX& beta, const AdaptationProblem& p);

// Concatenation of beta_p * wS_p blocks (the SGD prior).
VectorX scaled_source(const VectorX& w_source, const StructurePartition& part, const VectorX& beta);

// Per-block minimizer beta_p = <w_p, wS_p> / (||wS_p||^2 + gamma). Throws
// SingularBlock when the denominator vanishes (gamma = 0, zero source block).
VectorX beta_closed_form(const VectorX& w, const VectorX& w_source, const StructurePartition& part,
                         Scalar gamma);

struct AdaptLogRow {
  int round = 0;
  Scalar objective = 0;
  Scalar beta_norm = 0;
  Scalar beta_min = 0;
  Scalar beta_max = 0;
  int n_neg = 0;
};

void write_adapt_log(const std::string& path, const std::vector<AdaptLogRow>& rows);
void write_beta_csv(const std::string& path, const VectorX& beta, const StructurePartition& part);

// SA-SSVM: start from w = w^S, beta = 1; per round relabel latents and mine
// hard negatives on the target data only, then alternate SGD on w (beta
// fixed) with the closed-form beta update. Threshold is re-calibrated to
// FPPI=1 on the target held-out slice.
DpmModel adapt(const DpmModel& src, const Dataset& target, const AdaptConfig& cfg,
               std::vector<AdaptLogRow>* log = nullptr, VectorX* beta_out = nullptr);

struct RepetitionResult {
  DpmModel model;
  FppiMrCurve curve;
  VectorX beta;
  std::uint64_t seed = 0;
};

// Repetition r: image subset of x_fraction at seed cfg.seed + r, adapt, then
// evaluate on target_test.
std::vector<RepetitionResult> run_repetitions(const DpmModel& src, const Dataset& target_train,
                                              const Dataset& target_test, double x_fraction,
                                              const AdaptConfig& cfg,
                                              Scalar eval_threshold = -1.0);

}  // namespace vdpm
