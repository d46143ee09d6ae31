// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sfda/rng.hpp"

namespace sfda {

// Batches are row-major in the logical sense: one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Named view of one parameter tensor. Biases are stored as 1 x n matrices so
// every parameter is a Matrix.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
};

struct ConstParamRef {
  std::string name;
  const Matrix* value = nullptr;
};

struct Dense {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
};

struct MlpTrace {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation output of each layer
};

// Fully connected network with ReLU between layers and a linear output.
class Mlp {
 public:
  Mlp() = default;
  // widths = {in, hidden..., out}; fan-in scaled (He) initialisation.
  Mlp(const std::vector<int>& widths, Rng& rng);

  static Mlp zeros(const std::vector<int>& widths);
  Mlp zeros_like() const { return zeros(widths()); }

  std::vector<int> widths() const;
  int in_dim() const;
  int out_dim() const;
  std::size_t num_layers() const { return layers_.size(); }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, MlpTrace* trace) const;
  // Accumulates parameter gradients into `grad` (may be null) and returns the
  // gradient with respect to the input.
  Matrix backward(const MlpTrace& trace, const Matrix& grad_out,
                  Mlp* grad) const;

  std::vector<ParamRef> parameters(const std::string& prefix);
  std::vector<ConstParamRef> parameters(const std::string& prefix) const;

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<Dense> layers_;
};

struct BackboneSpec {
  enum class Kind { kIdentity, kConv };
  Kind kind = Kind::kIdentity;
  int channels = 3;
  int height = 32;
  int width = 32;
  // Output channels of each 3x3 convolution. Every stage but the last is
  // followed by 2x2 average pooling; the last by global average pooling.
  std::vector<int> conv_channels = {16, 32};

  int input_dim() const { return channels * height * width; }
  int output_dim() const;
  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

struct ConvLayer {
  Matrix weight;  // out x (in * 9)
  Matrix bias;    // 1 x out
};

struct BackboneTrace {
  // Per image, per stage: im2col matrix and pre-activation output.
  std::vector<std::vector<Matrix>> cols;
  std::vector<std::vector<Matrix>> pre;
};

// The input-to-v map. Identity passes flattened inputs through; the conv
// variant is a small stack of 3x3 same-padded convolutions with ReLU.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneSpec& spec, Rng& rng);

  const BackboneSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.input_dim(); }
  int output_dim() const { return spec_.output_dim(); }
  Backbone zeros_like() const;

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, BackboneTrace* trace) const;
  void backward(const BackboneTrace& trace, const Matrix& grad_out,
                Backbone* grad) const;

  std::vector<ParamRef> parameters(const std::string& prefix);
  std::vector<ConstParamRef> parameters(const std::string& prefix) const;

  std::vector<ConvLayer>& layers() { return layers_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }

 private:
  BackboneSpec spec_;
  std::vector<ConvLayer> layers_;
};

class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  // `params` and `grads` must line up and keep the same shapes across calls.
  void step(const std::vector<ParamRef>& params,
            const std::vector<ConstParamRef>& grads);

  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

Matrix softmax_rows(const Matrix& logits);
Vector log_sum_exp_rows(const Matrix& logits);

bool all_finite(const Matrix& m);

// FNV-1a over the raw bytes of each tensor, in order.
std::uint64_t checksum(const std::vector<ConstParamRef>& params);

}  // namespace sfda
