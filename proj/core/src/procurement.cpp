// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/procurement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <utility>

#include "sfda/batching.hpp"
#include "sfda/error.hpp"

namespace sfda {
namespace {

constexpr std::array<std::string_view, 4> kLossNames = {"L_CE", "L_v", "L_u",
                                                        "L_p"};

// Mean over rows of -log softmax(logits)[label], scaled by `weight`; adds
// weight * d/dlogits into `grad_logits`.
double weighted_nll(const Matrix& logits, std::span<const int> labels,
                    double weight, Matrix* grad_logits) {
  const Eigen::Index n = logits.rows();
  if (n == 0) return 0.0;
  const Vector lse = log_sum_exp_rows(logits);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += lse(i) - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  if (grad_logits) {
    Matrix g = softmax_rows(logits);
    for (Eigen::Index i = 0; i < n; ++i) g(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    *grad_logits += g * (weight / static_cast<double>(n));
  }
  return weight * total / static_cast<double>(n);
}

Matrix sign(const Matrix& m) {
  return m.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

void check_finite(double value, long step, std::string_view name) {
  if (!std::isfinite(value)) {
    throw TrainingDivergedError(step, std::string(name) + " is not finite");
  }
}

}  // namespace

ProcurementModel ProcurementModel::create(const ModelSpec& spec,
                                          int num_positive, int num_negative,
                                          std::uint64_t seed) {
  if (num_positive < 1 || num_negative < 0) {
    fail(ErrorKind::kInvalidConfiguration, "invalid class counts for model");
  }
  if (spec.u_dim <= 0) {
    fail(ErrorKind::kInvalidConfiguration, "u_dim must be positive");
  }
  Rng rng(seed);
  ProcurementModel m;
  m.spec = spec;
  m.num_positive = num_positive;
  m.num_negative = num_negative;
  m.backbone = Backbone(spec.backbone, rng);
  const int v_dim = m.backbone.output_dim();

  std::vector<int> fs = {v_dim};
  fs.insert(fs.end(), spec.feature_hidden.begin(), spec.feature_hidden.end());
  fs.push_back(spec.u_dim);
  m.feature_extractor = Mlp(fs, rng);
  m.classifier = Mlp({spec.u_dim, num_positive + num_negative}, rng);
  std::vector<int> g = {spec.u_dim};
  g.insert(g.end(), spec.decoder_hidden.begin(), spec.decoder_hidden.end());
  g.push_back(v_dim);
  m.decoder = Mlp(g, rng);
  m.validate();
  return m;
}

void ProcurementModel::validate() const {
  if (classifier.out_dim() != num_outputs()) {
    fail(ErrorKind::kInvalidConfiguration,
         "classifier width " + std::to_string(classifier.out_dim()) +
             " != |Cs| + |Cn| = " + std::to_string(num_outputs()));
  }
  if (feature_extractor.out_dim() != u_dim() || classifier.in_dim() != u_dim() ||
      decoder.in_dim() != u_dim()) {
    fail(ErrorKind::kInvalidConfiguration, "u-space widths disagree");
  }
  if (feature_extractor.in_dim() != v_dim() || decoder.out_dim() != v_dim()) {
    fail(ErrorKind::kInvalidConfiguration, "v-space widths disagree");
  }
}

std::vector<ParamRef> ProcurementModel::head_parameters() {
  auto out = feature_extractor.parameters("Fs");
  auto d = classifier.parameters("D");
  auto g = decoder.parameters("G");
  out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::vector<ConstParamRef> ProcurementModel::head_parameters() const {
  auto out = feature_extractor.parameters("Fs");
  auto d = classifier.parameters("D");
  auto g = decoder.parameters("G");
  out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::vector<ConstParamRef> ProcurementModel::all_parameters() const {
  auto out = backbone.parameters("M");
  auto heads = head_parameters();
  out.insert(out.end(), heads.begin(), heads.end());
  return out;
}

HeadGrad HeadGrad::zeros_like(const ProcurementModel& model) {
  return {model.feature_extractor.zeros_like(), model.classifier.zeros_like(),
          model.decoder.zeros_like()};
}

std::vector<ConstParamRef> HeadGrad::parameters() const {
  auto out = feature_extractor.parameters("Fs");
  auto d = classifier.parameters("D");
  auto g = decoder.parameters("G");
  out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::vector<ClassPrior> compute_class_priors(const Matrix& features,
                                             std::span<const ClassId> labels,
                                             int num_positive, double floor) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    fail(ErrorKind::kInvalidInput, "feature/label count mismatch");
  }
  const Eigen::Index dim = features.cols();
  std::vector<Vector> sum(num_positive, Vector::Zero(dim));
  std::vector<long> count(num_positive, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId c = labels[i];
    if (c < 0 || c >= num_positive) {
      fail(ErrorKind::kInvalidInput,
           "label " + std::to_string(c) + " is not a positive class");
    }
    sum[c] += features.row(static_cast<Eigen::Index>(i)).transpose();
    ++count[c];
  }
  std::vector<ClassPrior> priors(num_positive);
  for (int c = 0; c < num_positive; ++c) {
    if (count[c] < 2) {
      fail(ErrorKind::kPriorEstimation,
           "class " + std::to_string(c) + " has " + std::to_string(count[c]) +
               " samples; at least 2 are needed to estimate its prior");
    }
    priors[c].class_id = c;
    priors[c].mean = sum[c] / static_cast<double>(count[c]);
    priors[c].variance = Vector::Zero(dim);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId c = labels[i];
    const Vector d = features.row(static_cast<Eigen::Index>(i)).transpose() -
                     priors[c].mean;
    priors[c].variance += d.cwiseProduct(d);
  }
  for (int c = 0; c < num_positive; ++c) {
    priors[c].variance /= static_cast<double>(count[c] - 1);
    priors[c].variance = priors[c].variance.cwiseMax(floor);
  }
  return priors;
}

Matrix sample_prior(const ClassPrior& prior, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_prior(prior, n, rng);
}

Matrix sample_prior(const ClassPrior& prior, int n, Rng& rng) {
  if (prior.mean.size() != prior.variance.size() ||
      (prior.variance.array() <= 0.0).any()) {
    fail(ErrorKind::kInvalidInput, "invalid class prior");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index dim = prior.mean.size();
  const Vector sd = prior.variance.cwiseSqrt();
  Matrix out(n, dim);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      out(i, d) = prior.mean(d) + sd(d) * normal(rng);
    }
  }
  return out;
}

double log_density(const ClassPrior& prior, const Vector& u) {
  const Vector diff = u - prior.mean;
  double acc = 0.0;
  for (Eigen::Index d = 0; d < diff.size(); ++d) {
    acc += diff(d) * diff(d) / prior.variance(d) +
           std::log(2.0 * std::numbers::pi * prior.variance(d));
  }
  return -0.5 * acc;
}

double mahalanobis_distance(const ClassPrior& prior, const Vector& u) {
  const Vector diff = u - prior.mean;
  return std::sqrt((diff.array().square() / prior.variance.array()).sum());
}

Matrix sample_prior_negatives(const std::vector<ClassPrior>& priors, int n,
                              double min_distance, std::uint64_t seed,
                              double box_sigmas) {
  if (priors.empty()) {
    fail(ErrorKind::kInvalidConfiguration, "no priors to sample negatives from");
  }
  const Eigen::Index dim = priors.front().mean.size();
  Vector lo = Vector::Constant(dim, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const auto& p : priors) {
    const Vector spread = box_sigmas * p.variance.cwiseSqrt();
    lo = lo.cwiseMin(p.mean - spread);
    hi = hi.cwiseMax(p.mean + spread);
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix out(n, dim);
  const long max_attempts = 10000L * std::max(n, 1);
  long attempts = 0;
  for (int i = 0; i < n;) {
    if (++attempts > max_attempts) {
      fail(ErrorKind::kInvalidConfiguration,
           "could not place prior-sampled negatives away from all priors");
    }
    Vector u(dim);
    for (Eigen::Index d = 0; d < dim; ++d) u(d) = lo(d) + (hi(d) - lo(d)) * unit(rng);
    const bool far = std::all_of(priors.begin(), priors.end(), [&](const auto& p) {
      return mahalanobis_distance(p, u) >= min_distance;
    });
    if (far) out.row(i++) = u.transpose();
  }
  return out;
}

std::string_view to_string(PriorLogits mode) {
  return mode == PriorLogits::kLogDensity ? "log-density" : "density";
}

PriorLogits parse_prior_logits(std::string_view text) {
  if (text == "log-density") return PriorLogits::kLogDensity;
  if (text == "density") return PriorLogits::kDensity;
  fail(ErrorKind::kInvalidConfiguration,
       "prior_logits must be 'log-density' or 'density', got '" +
           std::string(text) + "'");
}

std::string_view to_string(NegativeMode mode) {
  return mode == NegativeMode::kComposite ? "composite" : "prior-sampled";
}

NegativeMode parse_negative_mode(std::string_view text) {
  if (text == "composite") return NegativeMode::kComposite;
  if (text == "prior-sampled") return NegativeMode::kPriorSampled;
  fail(ErrorKind::kInvalidConfiguration,
       "negative_mode must be 'composite' or 'prior-sampled', got '" +
           std::string(text) + "'");
}

std::string_view to_string(BackboneSpec::Kind kind) {
  return kind == BackboneSpec::Kind::kConv ? "conv" : "identity";
}

BackboneSpec::Kind parse_backbone_kind(std::string_view text) {
  if (text == "conv") return BackboneSpec::Kind::kConv;
  if (text == "identity") return BackboneSpec::Kind::kIdentity;
  fail(ErrorKind::kInvalidConfiguration,
       "backbone must be 'conv' or 'identity', got '" + std::string(text) + "'");
}

double cross_entropy_loss(const ProcurementModel& model,
                          const ProcurementBatch& batch, double alpha,
                          HeadGrad* grad) {
  double loss = 0.0;
  const double n_neg = static_cast<double>(batch.v_neg.rows() + batch.u_neg.rows());

  // Positives and image negatives share the Fs path; stack them so a single
  // forward/backward covers both.
  const Eigen::Index n_pos = batch.v_pos.rows();
  Matrix v(n_pos + batch.v_neg.rows(), model.v_dim());
  if (n_pos > 0) v.topRows(n_pos) = batch.v_pos;
  if (batch.v_neg.rows() > 0) v.bottomRows(batch.v_neg.rows()) = batch.v_neg;
  if (v.rows() > 0) {
    MlpTrace fs_trace, d_trace;
    const Matrix u = model.feature_extractor.forward(v, &fs_trace);
    const Matrix logits = model.classifier.forward(u, &d_trace);
    Matrix g = Matrix::Zero(logits.rows(), logits.cols());
    Matrix g_pos = Matrix::Zero(n_pos, logits.cols());
    loss += weighted_nll(logits.topRows(n_pos), batch.y_pos, 1.0, &g_pos);
    g.topRows(n_pos) = g_pos;
    if (batch.v_neg.rows() > 0) {
      // Negative term is a mean over all negatives (image and u-space).
      Matrix g_neg = Matrix::Zero(batch.v_neg.rows(), logits.cols());
      const double w = alpha * static_cast<double>(batch.v_neg.rows()) / n_neg;
      loss += weighted_nll(logits.bottomRows(batch.v_neg.rows()), batch.y_neg, w,
                           &g_neg);
      g.bottomRows(batch.v_neg.rows()) = g_neg;
    }
    if (grad) {
      const Matrix du = model.classifier.backward(d_trace, g, &grad->classifier);
      model.feature_extractor.backward(fs_trace, du, &grad->feature_extractor);
    }
  }
  if (batch.u_neg.rows() > 0) {
    MlpTrace d_trace;
    const Matrix logits = model.classifier.forward(batch.u_neg, &d_trace);
    Matrix g = Matrix::Zero(logits.rows(), logits.cols());
    const double w = alpha * static_cast<double>(batch.u_neg.rows()) / n_neg;
    loss += weighted_nll(logits, batch.y_u_neg, w, &g);
    if (grad) model.classifier.backward(d_trace, g, &grad->classifier);
  }
  return loss;
}

double reconstruction_v_loss(const ProcurementModel& model, const Matrix& v,
                             HeadGrad* grad) {
  if (v.rows() == 0) return 0.0;
  MlpTrace fs_trace, g_trace;
  const Matrix u = model.feature_extractor.forward(v, &fs_trace);
  const Matrix v_hat = model.decoder.forward(u, &g_trace);
  const Matrix residual = v - v_hat;
  const double n = static_cast<double>(residual.size());
  if (grad) {
    const Matrix g = -sign(residual) / n;
    const Matrix du = model.decoder.backward(g_trace, g, &grad->decoder);
    model.feature_extractor.backward(fs_trace, du, &grad->feature_extractor);
  }
  return residual.cwiseAbs().sum() / n;
}

double reconstruction_u_loss(const ProcurementModel& model,
                             const Matrix& u_prior, HeadGrad* grad) {
  if (u_prior.rows() == 0) return 0.0;
  MlpTrace g_trace, fs_trace;
  const Matrix v_gen = model.decoder.forward(u_prior, &g_trace);
  const Matrix u_hat = model.feature_extractor.forward(v_gen, &fs_trace);
  const Matrix residual = u_prior - u_hat;
  const double n = static_cast<double>(residual.size());
  if (grad) {
    const Matrix g = -sign(residual) / n;
    const Matrix dv = model.feature_extractor.backward(fs_trace, g,
                                                       &grad->feature_extractor);
    model.decoder.backward(g_trace, dv, &grad->decoder);
  }
  return residual.cwiseAbs().sum() / n;
}

double prior_loss(const ProcurementModel& model,
                  const std::vector<ClassPrior>& priors, const Matrix& v_pos,
                  std::span<const ClassId> y_pos, PriorLogits mode,
                  HeadGrad* grad) {
  const int cs = model.num_positive;
  if (static_cast<int>(priors.size()) != cs) {
    fail(ErrorKind::kInvalidConfiguration,
         "expected " + std::to_string(cs) + " class priors, got " +
             std::to_string(priors.size()));
  }
  for (int c = 0; c < cs; ++c) {
    if (priors[c].class_id != c) {
      fail(ErrorKind::kInvalidConfiguration,
           "missing prior for positive class " + std::to_string(c));
    }
  }
  const Eigen::Index n = v_pos.rows();
  if (n == 0) return 0.0;
  MlpTrace fs_trace;
  const Matrix u = model.feature_extractor.forward(v_pos, &fs_trace);

  Matrix scores(n, cs);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector ui = u.row(i).transpose();
    for (int c = 0; c < cs; ++c) {
      const double ld = log_density(priors[c], ui);
      scores(i, c) = mode == PriorLogits::kLogDensity ? ld : std::exp(ld);
    }
  }
  Matrix g_scores = Matrix::Zero(n, cs);
  const double loss = weighted_nll(scores, y_pos, 1.0, &g_scores);
  if (grad) {
    Matrix du = Matrix::Zero(n, u.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < cs; ++c) {
        // d score / du = -(u - mu) / var, times the density in density mode.
        Eigen::RowVectorXd d = -((u.row(i) - priors[c].mean.transpose()).array() /
                                 priors[c].variance.transpose().array())
                                    .matrix();
        if (mode == PriorLogits::kDensity) d *= scores(i, c);
        du.row(i) += g_scores(i, c) * d;
      }
    }
    model.feature_extractor.backward(fs_trace, du, &grad->feature_extractor);
  }
  return loss;
}

ProcurementLosses procurement_losses(const ProcurementModel& model,
                                     const std::vector<ClassPrior>& priors,
                                     const ProcurementBatch& batch, double alpha,
                                     PriorLogits mode) {
  return {cross_entropy_loss(model, batch, alpha, nullptr),
          reconstruction_v_loss(model, batch.v_pos, nullptr),
          reconstruction_u_loss(model, batch.u_prior, nullptr),
          prior_loss(model, priors, batch.v_pos, batch.y_pos, mode, nullptr)};
}

void ProcurementConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    fail(ErrorKind::kInvalidConfiguration, "alpha must be in (0, 1]");
  }
  if (!(learning_rate > 0.0) || !(pretrain_learning_rate > 0.0)) {
    fail(ErrorKind::kInvalidConfiguration, "learning rates must be positive");
  }
  if (max_iter < 0 || pretrain_steps < 0) {
    fail(ErrorKind::kInvalidConfiguration, "iteration counts must be >= 0");
  }
  if (update_iter < 1 || (max_iter > 0 && update_iter > max_iter)) {
    fail(ErrorKind::kInvalidConfiguration,
         "update_iter must be in [1, max_iter]");
  }
  if (batch_size < 1 || negative_ratio < 0.0) {
    fail(ErrorKind::kInvalidConfiguration, "invalid batch composition");
  }
  if (!(prior_negative_distance > 0.0)) {
    fail(ErrorKind::kInvalidConfiguration,
         "prior_negative_distance must be positive");
  }
}

void pretrain(ProcurementModel& model, const LabeledInputs& positives,
              long steps, double learning_rate, int batch_size,
              std::uint64_t seed, const TraceObserver& observer) {
  if (steps <= 0) return;
  if (positives.inputs.rows() == 0) {
    fail(ErrorKind::kInvalidInput, "pretraining needs positive samples");
  }
  std::vector<ParamRef> params = model.backbone.parameters("M");
  for (auto& p : model.feature_extractor.parameters("Fs")) params.push_back(p);
  for (auto& p : model.classifier.parameters("D")) params.push_back(p);
  Adam adam(learning_rate);
  BatchSampler sampler(static_cast<std::size_t>(positives.inputs.rows()),
                       derive_seed(seed, {0x70}));

  for (long step = 0; step < steps; ++step) {
    const auto idx = sampler.next(static_cast<std::size_t>(batch_size));
    const Matrix x = gather_rows(positives.inputs, idx);
    const std::vector<int> y = gather(positives.labels, idx);

    BackboneTrace m_trace;
    MlpTrace fs_trace, d_trace;
    const Matrix v = model.backbone.forward(x, &m_trace);
    const Matrix u = model.feature_extractor.forward(v, &fs_trace);
    const Matrix logits = model.classifier.forward(u, &d_trace);
    Matrix g = Matrix::Zero(logits.rows(), logits.cols());
    const double loss = weighted_nll(logits, y, 1.0, &g);
    check_finite(loss, step, "pretraining cross-entropy");
    if (observer) observer({step, "pretrain_CE", loss});

    Backbone m_grad = model.backbone.zeros_like();
    Mlp fs_grad = model.feature_extractor.zeros_like();
    Mlp d_grad = model.classifier.zeros_like();
    const Matrix du = model.classifier.backward(d_trace, g, &d_grad);
    const Matrix dv = model.feature_extractor.backward(fs_trace, du, &fs_grad);
    model.backbone.backward(m_trace, dv, &m_grad);

    std::vector<ConstParamRef> grads = std::as_const(m_grad).parameters("M");
    for (auto& p : std::as_const(fs_grad).parameters("Fs")) grads.push_back(p);
    for (auto& p : std::as_const(d_grad).parameters("D")) grads.push_back(p);
    adam.step(params, grads);
  }
}

std::string_view loss_name(int round_robin_index) {
  return kLossNames[static_cast<std::size_t>(round_robin_index) % kLossNames.size()];
}

ProcurementResult run_procurement(ProcurementModel model,
                                  const LabeledInputs& positives,
                                  const LabeledInputs& negatives,
                                  const ProcurementConfig& config,
                                  const TraceObserver& observer) {
  config.validate();
  model.validate();
  const int cs = model.num_positive;
  for (int y : positives.labels) {
    if (y < 0 || y >= cs) {
      fail(ErrorKind::kInvalidInput, "positive label " + std::to_string(y) +
                                         " outside [0, |Cs|)");
    }
  }
  const bool prior_sampled = config.negative_mode == NegativeMode::kPriorSampled;
  if (prior_sampled) {
    if (model.num_negative != 1) {
      fail(ErrorKind::kInvalidConfiguration,
           "prior-sampled negatives need a model with exactly one negative class");
    }
  } else {
    for (int y : negatives.labels) {
      if (y < cs || y >= model.num_outputs()) {
        fail(ErrorKind::kInvalidConfiguration,
             "negative label " + std::to_string(y) +
                 " is not an output of the negative table");
      }
    }
    if (config.negative_ratio > 0.0 && negatives.inputs.rows() == 0 &&
        config.max_iter > 0) {
      fail(ErrorKind::kInvalidConfiguration, "no negative samples supplied");
    }
  }

  pretrain(model, positives, config.pretrain_steps, config.pretrain_learning_rate,
           config.batch_size, config.seed, observer);

  const Matrix v_pos = backbone_features(model.backbone, positives.inputs);
  const Matrix v_neg = prior_sampled ? Matrix(0, model.v_dim())
                                     : backbone_features(model.backbone, negatives.inputs);

  ProcurementResult result;
  auto priors = compute_class_priors(model.embed(v_pos), positives.labels, cs);

  const int n_neg_batch = static_cast<int>(
      std::lround(config.batch_size * config.negative_ratio));
  Matrix u_neg_pool;
  std::uint64_t refresh = 0;
  auto regenerate_u_negatives = [&] {
    u_neg_pool = sample_prior_negatives(
        priors, static_cast<int>(std::max<Eigen::Index>(v_pos.rows(), 1)),
        config.prior_negative_distance,
        derive_seed(config.seed, {0x6e, refresh++}));
  };
  if (prior_sampled) regenerate_u_negatives();

  std::array<Adam, 4> optimizers = {Adam(config.learning_rate),
                                    Adam(config.learning_rate),
                                    Adam(config.learning_rate),
                                    Adam(config.learning_rate)};
  BatchSampler pos_sampler(static_cast<std::size_t>(v_pos.rows()),
                           derive_seed(config.seed, {0x71}));
  BatchSampler neg_sampler(static_cast<std::size_t>(v_neg.rows()),
                           derive_seed(config.seed, {0x72}));
  Rng rng(derive_seed(config.seed, {0x73}));
  std::uniform_int_distribution<int> pick_class(0, cs - 1);
  const auto params = model.head_parameters();

  for (long iter = 0; iter < config.max_iter; ++iter) {
    if (iter % config.update_iter == 0 && iter > 0) {
      priors = compute_class_priors(model.embed(v_pos), positives.labels, cs);
      if (prior_sampled) regenerate_u_negatives();
    }
    const int which = static_cast<int>(iter % 4);
    ProcurementBatch batch;
    const auto pos_idx = pos_sampler.next(static_cast<std::size_t>(config.batch_size));
    batch.v_pos = gather_rows(v_pos, pos_idx);
    batch.y_pos = gather(positives.labels, pos_idx);

    HeadGrad grad = HeadGrad::zeros_like(model);
    double value = 0.0;
    switch (which) {
      case 0: {
        if (prior_sampled) {
          std::uniform_int_distribution<Eigen::Index> pick(0, u_neg_pool.rows() - 1);
          batch.u_neg.resize(n_neg_batch, model.u_dim());
          for (int k = 0; k < n_neg_batch; ++k) batch.u_neg.row(k) = u_neg_pool.row(pick(rng));
          batch.y_u_neg.assign(static_cast<std::size_t>(n_neg_batch), cs);
        } else {
          const auto neg_idx = neg_sampler.next(static_cast<std::size_t>(n_neg_batch));
          batch.v_neg = gather_rows(v_neg, neg_idx);
          batch.y_neg = gather(negatives.labels, neg_idx);
        }
        value = cross_entropy_loss(model, batch, config.alpha, &grad);
        break;
      }
      case 1:
        value = reconstruction_v_loss(model, batch.v_pos, &grad);
        break;
      case 2: {
        batch.u_prior.resize(config.batch_size, model.u_dim());
        for (int k = 0; k < config.batch_size; ++k) {
          batch.u_prior.row(k) = sample_prior(priors[pick_class(rng)], 1, rng).row(0);
        }
        value = reconstruction_u_loss(model, batch.u_prior, &grad);
        break;
      }
      default:
        value = prior_loss(model, priors, batch.v_pos, batch.y_pos,
                           config.prior_logits, &grad);
        break;
    }
    check_finite(value, iter, loss_name(which));
    optimizers[which].step(params, grad.parameters());
    TraceRow row{iter, std::string(loss_name(which)), value};
    if (observer) observer(row);
    result.trace.push_back(std::move(row));
  }

  result.priors = compute_class_priors(model.embed(v_pos), positives.labels, cs);
  result.model = std::move(model);
  return result;
}

}  // namespace sfda
