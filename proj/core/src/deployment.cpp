// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/deployment.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "sfda/batching.hpp"
#include "sfda/error.hpp"

namespace sfda {
namespace {

void check_split(std::size_t k, int num_positive) {
  if (num_positive < 1 || static_cast<std::size_t>(num_positive) >= k) {
    fail(ErrorKind::kInvalidInput,
         "need 1 <= |Cs| < K, got |Cs|=" + std::to_string(num_positive) +
             " K=" + std::to_string(k));
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - mx);
    sum += out[k];
  }
  for (double& p : out) p /= sum;
  return out;
}

double lse(const Eigen::Ref<const Eigen::RowVectorXd>& a) {
  const double mx = a.maxCoeff();
  return mx + std::log((a.array() - mx).exp().sum());
}

// Entropy of softmax(a) and its gradient with respect to a.
double softmax_entropy(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                       Eigen::RowVectorXd* grad) {
  const double z = lse(a);
  const Eigen::RowVectorXd log_p = a.array() - z;
  const Eigen::RowVectorXd p = log_p.array().exp();
  const double h = -(p.array() * log_p.array()).sum();
  if (grad) *grad = -(p.array() * (log_p.array() + h));
  return h;
}

}  // namespace

std::string_view to_string(SsmComplement mode) {
  return mode == SsmComplement::kMinPositive ? "min_positive" : "max_positive";
}

SsmComplement parse_ssm_complement(std::string_view text) {
  if (text == "min_positive") return SsmComplement::kMinPositive;
  if (text == "max_positive") return SsmComplement::kMaxPositive;
  fail(ErrorKind::kInvalidConfiguration,
       "unknown ssm_complement '" + std::string(text) + "'");
}

SsmWeight compute_ssm(std::span<const double> y_hat, int num_positive,
                      SsmComplement mode) {
  check_split(y_hat.size(), num_positive);
  double hi = 0.0, lo = 1.0;
  for (std::size_t k = 0; k < y_hat.size(); ++k) {
    const double p = y_hat[k];
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(ErrorKind::kInvalidInput, "class probability outside [0, 1]");
    }
    if (k < static_cast<std::size_t>(num_positive)) {
      hi = std::max(hi, p);
      lo = std::min(lo, p);
    }
  }
  return {std::exp(hi),
          std::exp(1.0 - (mode == SsmComplement::kMinPositive ? lo : hi))};
}

double loss_d1(std::span<const double> z_hat, const SsmWeight& ssm,
               int num_positive) {
  check_split(z_hat.size(), num_positive);
  double pos = 0.0, neg = 0.0;
  for (std::size_t k = 0; k < z_hat.size(); ++k) {
    (k < static_cast<std::size_t>(num_positive) ? pos : neg) += z_hat[k];
  }
  return ssm.w * -std::log(std::max(pos, kGroupMassFloor)) +
         ssm.w_prime * -std::log(std::max(neg, kGroupMassFloor));
}

SplitSoftmax split_softmax(std::span<const double> logits, int num_positive) {
  check_split(logits.size(), num_positive);
  return {softmax(logits.first(static_cast<std::size_t>(num_positive))),
          softmax(logits.subspan(static_cast<std::size_t>(num_positive)))};
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double loss_d2(const SplitSoftmax& split, const SsmWeight& ssm) {
  return ssm.w * entropy(split.positive) + ssm.w_prime * entropy(split.negative);
}

AdaptationLoss adaptation_loss(const Matrix& logits,
                               std::span<const SsmWeight> ssm, int num_positive,
                               double beta, Matrix* grad_logits) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index k = logits.cols();
  check_split(static_cast<std::size_t>(k), num_positive);
  if (static_cast<std::size_t>(n) != ssm.size()) {
    fail(ErrorKind::kInvalidInput, "one SSM weight per sample is required");
  }
  const Eigen::Index cs = num_positive, cn = k - cs;
  const double log_floor = std::log(kGroupMassFloor);
  if (grad_logits) *grad_logits = Matrix::Zero(n, k);

  AdaptationLoss out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd h = logits.row(i);
    const SsmWeight& s = ssm[static_cast<std::size_t>(i)];
    const double z_all = lse(h);
    const double z_pos = lse(h.head(cs));
    const double z_neg = lse(h.tail(cn));
    const double log_pos = z_pos - z_all;
    const double log_neg = z_neg - z_all;
    const double d1 =
        s.w * -std::max(log_pos, log_floor) + s.w_prime * -std::max(log_neg, log_floor);

    Eigen::RowVectorXd gh_pos, gh_neg;
    const double hs = softmax_entropy(h.head(cs), grad_logits ? &gh_pos : nullptr);
    const double hn = softmax_entropy(h.tail(cn), grad_logits ? &gh_neg : nullptr);
    const double d2 = s.w * hs + s.w_prime * hn;

    out.d1 += d1;
    out.d2 += d2;
    if (grad_logits) {
      const Eigen::RowVectorXd z_hat = (h.array() - z_all).exp();
      Eigen::RowVectorXd g = (s.w + s.w_prime) * z_hat;
      g.head(cs) -= s.w * (h.head(cs).array() - z_pos).exp().matrix();
      g.tail(cn) -= s.w_prime * (h.tail(cn).array() - z_neg).exp().matrix();
      g.head(cs) += beta * s.w * gh_pos;
      g.tail(cn) += beta * s.w_prime * gh_neg;
      grad_logits->row(i) = g / static_cast<double>(n);
    }
  }
  if (n > 0) {
    out.d1 /= static_cast<double>(n);
    out.d2 /= static_cast<double>(n);
  }
  out.total = out.d1 + beta * out.d2;
  return out;
}

DeploymentModel::DeploymentModel(ProcurementModel frozen,
                                 std::vector<ClassPrior> priors)
    : frozen_(std::move(frozen)), priors_(std::move(priors)) {
  frozen_.validate();
  target_extractor_ = frozen_.feature_extractor;
}

DeploymentModel::DeploymentModel(ProcurementModel frozen,
                                 std::vector<ClassPrior> priors,
                                 Mlp target_extractor)
    : frozen_(std::move(frozen)),
      priors_(std::move(priors)),
      target_extractor_(std::move(target_extractor)) {
  frozen_.validate();
  if (target_extractor_.widths() != frozen_.feature_extractor.widths()) {
    fail(ErrorKind::kInvalidConfiguration, "Ft must have the shape of Fs");
  }
}

Matrix DeploymentModel::backbone_features(const Matrix& inputs) const {
  return sfda::backbone_features(frozen_.backbone, inputs);
}

Matrix DeploymentModel::source_probabilities(const Matrix& v) const {
  return softmax_rows(frozen_.logits_from_v(v));
}

Matrix DeploymentModel::target_logits(const Matrix& v) const {
  return frozen_.classifier.forward(target_extractor_.forward(v));
}

std::vector<SsmWeight> DeploymentModel::ssm(const Matrix& v,
                                            SsmComplement mode) const {
  const Matrix probs = source_probabilities(v);
  std::vector<SsmWeight> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  std::vector<double> row(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index k = 0; k < probs.cols(); ++k) row[k] = probs(i, k);
    out.push_back(compute_ssm(row, num_positive(), mode));
  }
  return out;
}

std::uint64_t DeploymentModel::frozen_checksum() const {
  return checksum(frozen_.all_parameters());
}

void AdaptationConfig::validate() const {
  if (!(beta >= 0.0)) fail(ErrorKind::kInvalidConfiguration, "beta must be >= 0");
  if (!(learning_rate > 0.0)) {
    fail(ErrorKind::kInvalidConfiguration, "learning rate must be positive");
  }
  if (iterations < 0 || batch_size < 1) {
    fail(ErrorKind::kInvalidConfiguration, "invalid adaptation schedule");
  }
}

std::vector<AdaptationTraceRow> run_adaptation(DeploymentModel& model,
                                               const Matrix& target_inputs,
                                               const AdaptationConfig& config,
                                               const AdaptationObserver& observer) {
  config.validate();
  std::vector<AdaptationTraceRow> trace;
  if (config.iterations == 0) return trace;
  if (target_inputs.rows() == 0) {
    fail(ErrorKind::kInvalidInput, "adaptation needs target samples");
  }
  const Matrix v = model.backbone_features(target_inputs);
  if (!all_finite(v)) throw TrainingDivergedError(0, "target features are not finite");
  std::vector<SsmWeight> cached;
  if (config.cache_ssm) cached = model.ssm(v, config.ssm_complement);

  const ProcurementModel& frozen = model.frozen();
  Mlp& ft = model.target_extractor();
  const auto params = ft.parameters("Ft");
  Adam adam(config.learning_rate);
  BatchSampler sampler(static_cast<std::size_t>(v.rows()),
                       derive_seed(config.seed, {0x64}));

  for (long step = 0; step < config.iterations; ++step) {
    const auto idx = sampler.next(static_cast<std::size_t>(config.batch_size));
    const Matrix vb = gather_rows(v, idx);
    const std::vector<SsmWeight> ssm =
        config.cache_ssm ? gather(cached, idx) : model.ssm(vb, config.ssm_complement);

    MlpTrace ft_trace, d_trace;
    const Matrix u = ft.forward(vb, &ft_trace);
    const Matrix logits = frozen.classifier.forward(u, &d_trace);
    Matrix g_logits;
    const AdaptationLoss loss =
        adaptation_loss(logits, ssm, frozen.num_positive, config.beta, &g_logits);
    if (!std::isfinite(loss.total)) {
      throw TrainingDivergedError(step, "L_d is not finite");
    }
    // D is frozen: propagate through it without accumulating its gradient.
    const Matrix du = frozen.classifier.backward(d_trace, g_logits, nullptr);
    Mlp ft_grad = ft.zeros_like();
    ft.backward(ft_trace, du, &ft_grad);
    adam.step(params, std::as_const(ft_grad).parameters("Ft"));

    AdaptationTraceRow row{step, loss.d1, loss.d2, loss.total};
    if (observer) observer(row, model);
    trace.push_back(row);
  }
  return trace;
}

}  // namespace sfda
