// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sfda/nn.hpp"
#include "sfda/procurement.hpp"

namespace sfda {

// Lower bound applied to a group probability mass before taking its log.
inline constexpr double kGroupMassFloor = 1e-12;

// Source similarity weights of one target sample, both in [1, e].
struct SsmWeight {
  double w = 1.0;        // max_i exp(y^(i)) over positive classes
  double w_prime = 1.0;  // max_i exp(1 - y^(i)) over positive classes
};

// How w' is derived from the positive-class probabilities.
enum class SsmComplement {
  kMinPositive,  // w' = exp(1 - min_i y^(i)), the default
  kMaxPositive,  // w' = exp(1 - max_i y^(i)), so that log w + log w' = 1
};

std::string_view to_string(SsmComplement mode);
SsmComplement parse_ssm_complement(std::string_view text);

// `y_hat` is a K-probability vector from the frozen source path.
SsmWeight compute_ssm(std::span<const double> y_hat, int num_positive,
                      SsmComplement mode = SsmComplement::kMinPositive);

// w * -log(sum of positive mass) + w' * -log(sum of negative mass).
double loss_d1(std::span<const double> z_hat, const SsmWeight& ssm,
               int num_positive);

struct SplitSoftmax {
  std::vector<double> positive;  // softmax over the first |Cs| logits
  std::vector<double> negative;  // softmax over the remaining |Cn| logits
};

SplitSoftmax split_softmax(std::span<const double> logits, int num_positive);

// Shannon entropy with 0 log 0 = 0.
double entropy(std::span<const double> p);

// w * H(positive) + w' * H(negative).
double loss_d2(const SplitSoftmax& split, const SsmWeight& ssm);

struct AdaptationLoss {
  double d1 = 0.0;
  double d2 = 0.0;
  double total = 0.0;  // d1 + beta * d2
};

// Batch means of L_d1, L_d2 and L_d = L_d1 + beta * L_d2 from deployment-path
// logits (one row per sample). When `grad_logits` is non-null it receives
// dL_d/dlogits. Group log-masses are floored at log(kGroupMassFloor) in the
// value; the gradient is that of the unfloored expression.
AdaptationLoss adaptation_loss(const Matrix& logits,
                               std::span<const SsmWeight> ssm, int num_positive,
                               double beta, Matrix* grad_logits);

// Frozen procurement model (M, Fs, D, G, priors) plus the trainable target
// feature extractor Ft, initialised as an exact copy of Fs.
class DeploymentModel {
 public:
  DeploymentModel(ProcurementModel frozen, std::vector<ClassPrior> priors);
  // Resumes from an already adapted Ft.
  DeploymentModel(ProcurementModel frozen, std::vector<ClassPrior> priors,
                  Mlp target_extractor);

  const ProcurementModel& frozen() const { return frozen_; }
  const std::vector<ClassPrior>& priors() const { return priors_; }
  const Mlp& target_extractor() const { return target_extractor_; }
  Mlp& target_extractor() { return target_extractor_; }
  int num_positive() const { return frozen_.num_positive; }

  Matrix backbone_features(const Matrix& inputs) const;
  // Softmax of D(Fs(v)): the frozen source path.
  Matrix source_probabilities(const Matrix& v) const;
  // D(Ft(v)).
  Matrix target_logits(const Matrix& v) const;
  // Ft(v).
  Matrix target_embedding(const Matrix& v) const {
    return target_extractor_.forward(v);
  }

  std::vector<SsmWeight> ssm(
      const Matrix& v, SsmComplement mode = SsmComplement::kMinPositive) const;
  std::uint64_t frozen_checksum() const;

 private:
  ProcurementModel frozen_;
  std::vector<ClassPrior> priors_;
  Mlp target_extractor_;
};

struct AdaptationConfig {
  double beta = 0.1;
  double learning_rate = 1e-4;
  long iterations = 1000;
  int batch_size = 32;
  // Reuse the SSM computed once per sample instead of recomputing per batch.
  bool cache_ssm = false;
  SsmComplement ssm_complement = SsmComplement::kMinPositive;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdaptationTraceRow {
  long step = 0;
  double d1 = 0.0;
  double d2 = 0.0;
  double total = 0.0;
};

using AdaptationObserver =
    std::function<void(const AdaptationTraceRow&, const DeploymentModel&)>;

// Trains only Ft on unlabeled target inputs. The function sees no labels and
// no source data. Throws TrainingDivergedError on a non-finite loss.
std::vector<AdaptationTraceRow> run_adaptation(
    DeploymentModel& model, const Matrix& target_inputs,
    const AdaptationConfig& config, const AdaptationObserver& observer = {});

}  // namespace sfda
