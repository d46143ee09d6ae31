// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sfda/label_space.hpp"
#include "sfda/nn.hpp"

namespace sfda {

inline constexpr double kVarianceFloor = 1e-4;

struct ModelSpec {
  BackboneSpec backbone;
  std::vector<int> feature_hidden = {64};  // Fs hidden widths
  int u_dim = 16;
  std::vector<int> decoder_hidden = {64};  // G hidden widths
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Backbone M, feature extractor Fs (v -> u), classifier D (u -> K logits) and
// decoder G (u -> v). K = num_positive + num_negative.
struct ProcurementModel {
  ModelSpec spec;
  int num_positive = 0;
  int num_negative = 0;
  Backbone backbone;
  Mlp feature_extractor;
  Mlp classifier;
  Mlp decoder;

  static ProcurementModel create(const ModelSpec& spec, int num_positive,
                                 int num_negative, std::uint64_t seed);

  int num_outputs() const { return num_positive + num_negative; }
  int v_dim() const { return backbone.output_dim(); }
  int u_dim() const { return spec.u_dim; }

  // Checked on construction and after loading.
  void validate() const;

  Matrix embed(const Matrix& v) const { return feature_extractor.forward(v); }
  Matrix logits_from_v(const Matrix& v) const {
    return classifier.forward(feature_extractor.forward(v));
  }
  Matrix probabilities(const Matrix& inputs) const {
    return softmax_rows(logits_from_v(backbone.forward(inputs)));
  }

  // Fs, D and G: the parameters trained by the procurement losses.
  std::vector<ParamRef> head_parameters();
  std::vector<ConstParamRef> head_parameters() const;
  std::vector<ConstParamRef> all_parameters() const;
};

// Gradient container for the trainable heads (Fs, D, G).
struct HeadGrad {
  Mlp feature_extractor;
  Mlp classifier;
  Mlp decoder;

  static HeadGrad zeros_like(const ProcurementModel& model);
  std::vector<ConstParamRef> parameters() const;
};

// Diagonal Gaussian over u-space for one positive class.
struct ClassPrior {
  ClassId class_id = 0;
  Vector mean;
  Vector variance;
};

// Per class: sample mean and unbiased per-dimension variance floored at
// `floor`. Throws kPriorEstimation for a class with fewer than 2 samples.
std::vector<ClassPrior> compute_class_priors(const Matrix& features,
                                             std::span<const ClassId> labels,
                                             int num_positive,
                                             double floor = kVarianceFloor);

Matrix sample_prior(const ClassPrior& prior, int n, std::uint64_t seed);
Matrix sample_prior(const ClassPrior& prior, int n, Rng& rng);

double log_density(const ClassPrior& prior, const Vector& u);
double mahalanobis_distance(const ClassPrior& prior, const Vector& u);

// Rejection-samples u vectors that are at least `min_distance` (Mahalanobis)
// away from every prior. Proposals are uniform in the box spanned by the
// prior means +/- `box_sigmas` standard deviations.
Matrix sample_prior_negatives(const std::vector<ClassPrior>& priors, int n,
                              double min_distance, std::uint64_t seed,
                              double box_sigmas = 6.0);

enum class PriorLogits {
  kLogDensity,  // softmax over log N(u | mu, Sigma)
  kDensity,     // softmax over N(u | mu, Sigma) itself
};

enum class NegativeMode {
  kComposite,     // image composites, one class per table entry
  kPriorSampled,  // single negative class of u vectors far from all priors
};

std::string_view to_string(PriorLogits mode);
PriorLogits parse_prior_logits(std::string_view text);
std::string_view to_string(NegativeMode mode);
NegativeMode parse_negative_mode(std::string_view text);
std::string_view to_string(BackboneSpec::Kind kind);
BackboneSpec::Kind parse_backbone_kind(std::string_view text);

struct ProcurementLosses {
  double ce = 0.0;
  double v = 0.0;
  double u = 0.0;
  double p = 0.0;
};

// One training batch in v-space. Negatives either arrive as backbone features
// (`v_neg`) or directly as u vectors (`u_neg`, prior-sampled mode).
struct ProcurementBatch {
  Matrix v_pos;
  std::vector<ClassId> y_pos;
  Matrix v_neg;
  std::vector<int> y_neg;
  Matrix u_neg;
  std::vector<int> y_u_neg;
  Matrix u_prior;  // draws u_r from the class priors
};

// mean_pos(-log y^(k_s)) + alpha * mean_neg(-log y^(k_n)), softmax over all K.
double cross_entropy_loss(const ProcurementModel& model,
                          const ProcurementBatch& batch, double alpha,
                          HeadGrad* grad);
// mean |v - G(Fs(v))| over positive samples and dimensions.
double reconstruction_v_loss(const ProcurementModel& model, const Matrix& v,
                             HeadGrad* grad);
// mean |u_r - Fs(G(u_r))|.
double reconstruction_u_loss(const ProcurementModel& model,
                             const Matrix& u_prior, HeadGrad* grad);
// mean -log softmax_i(score_i(u_s))[k_s] with score = (log-)density under the
// positive class priors. Priors are treated as constants.
double prior_loss(const ProcurementModel& model,
                  const std::vector<ClassPrior>& priors, const Matrix& v_pos,
                  std::span<const ClassId> y_pos, PriorLogits mode,
                  HeadGrad* grad);

ProcurementLosses procurement_losses(const ProcurementModel& model,
                                     const std::vector<ClassPrior>& priors,
                                     const ProcurementBatch& batch, double alpha,
                                     PriorLogits mode);

struct LabeledInputs {
  Matrix inputs;  // one flattened input per row
  std::vector<int> labels;
};

struct ProcurementConfig {
  double alpha = 0.2;
  double learning_rate = 1e-4;
  long max_iter = 4000;
  long update_iter = 200;
  long pretrain_steps = 500;
  double pretrain_learning_rate = 1e-4;
  int batch_size = 32;
  // Negative samples per positive sample in each batch.
  double negative_ratio = 1.0;
  PriorLogits prior_logits = PriorLogits::kLogDensity;
  NegativeMode negative_mode = NegativeMode::kComposite;
  double prior_negative_distance = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TraceRow {
  long step = 0;
  std::string loss;
  double value = 0.0;
};

using TraceObserver = std::function<void(const TraceRow&)>;

// Cross-entropy on positives only, over all K logits; trains M, Fs and D.
// Zero steps leaves the model untouched.
void pretrain(ProcurementModel& model, const LabeledInputs& positives,
              long steps, double learning_rate, int batch_size,
              std::uint64_t seed, const TraceObserver& observer = {});

struct ProcurementResult {
  ProcurementModel model;
  std::vector<ClassPrior> priors;
  std::vector<TraceRow> trace;  // one row per main-loop step
};

std::string_view loss_name(int round_robin_index);

// Pretraining, prior initialisation, then max_iter steps applying L_CE, L_v,
// L_u and L_p round-robin (one per step, each with its own Adam state).
// Priors are recomputed every update_iter steps and once more at the end so
// the returned priors describe the returned model. M is frozen after
// pretraining.
ProcurementResult run_procurement(ProcurementModel model,
                                  const LabeledInputs& positives,
                                  const LabeledInputs& negatives,
                                  const ProcurementConfig& config,
                                  const TraceObserver& observer = {});

}  // namespace sfda
