// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/nn.hpp"

#include <cmath>
#include <random>

#include "sfda/error.hpp"

namespace sfda {
namespace {

constexpr int kKernel = 3;

Matrix he_normal(int rows, int cols, int fan_in, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre, const Matrix& grad) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

// (C x H*W) feature map -> (C*9 x H*W) patches, zero padded.
Matrix im2col(const Matrix& in, int height, int width) {
  const int channels = static_cast<int>(in.rows());
  Matrix cols = Matrix::Zero(channels * kKernel * kKernel, height * width);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const int row = (c * kKernel + ky) * kKernel + kx;
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          for (int x = 0; x < width; ++x) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= width) continue;
            cols(row, y * width + x) = in(c, sy * width + sx);
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, int channels, int height, int width) {
  Matrix out = Matrix::Zero(channels, height * width);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const int row = (c * kKernel + ky) * kKernel + kx;
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          for (int x = 0; x < width; ++x) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= width) continue;
            out(c, sy * width + sx) += cols(row, y * width + x);
          }
        }
      }
    }
  }
  return out;
}

Matrix avg_pool2(const Matrix& in, int height, int width) {
  const int oh = height / 2, ow = width / 2;
  Matrix out(in.rows(), oh * ow);
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const int p = 2 * y * width + 2 * x;
        out(c, y * ow + x) = 0.25 * (in(c, p) + in(c, p + 1) +
                                     in(c, p + width) + in(c, p + width + 1));
      }
    }
  }
  return out;
}

Matrix avg_unpool2(const Matrix& grad, int height, int width) {
  const int oh = height / 2, ow = width / 2;
  Matrix out = Matrix::Zero(grad.rows(), height * width);
  for (Eigen::Index c = 0; c < grad.rows(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const double g = 0.25 * grad(c, y * ow + x);
        const int p = 2 * y * width + 2 * x;
        out(c, p) += g;
        out(c, p + 1) += g;
        out(c, p + width) += g;
        out(c, p + width + 1) += g;
      }
    }
  }
  return out;
}

template <typename Ref, typename Net>
std::vector<Ref> collect_dense(Net& layers, const std::string& prefix) {
  std::vector<Ref> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    out.push_back({base + ".weight", &layers[l].weight});
    out.push_back({base + ".bias", &layers[l].bias});
  }
  return out;
}

}  // namespace

Mlp::Mlp(const std::vector<int>& widths, Rng& rng) {
  if (widths.size() < 2) {
    fail(ErrorKind::kInvalidConfiguration, "an MLP needs at least 2 widths");
  }
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] <= 0 || widths[l + 1] <= 0) {
      fail(ErrorKind::kInvalidConfiguration, "MLP widths must be positive");
    }
    layers_.push_back({he_normal(widths[l + 1], widths[l], widths[l], rng),
                       Matrix::Zero(1, widths[l + 1])});
  }
}

Mlp Mlp::zeros(const std::vector<int>& widths) {
  Mlp m;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    m.layers_.push_back({Matrix::Zero(widths[l + 1], widths[l]),
                         Matrix::Zero(1, widths[l + 1])});
  }
  return m;
}

std::vector<int> Mlp::widths() const {
  std::vector<int> w;
  if (layers_.empty()) return w;
  w.push_back(static_cast<int>(layers_.front().weight.cols()));
  for (const auto& l : layers_) w.push_back(static_cast<int>(l.weight.rows()));
  return w;
}

int Mlp::in_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int Mlp::out_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

Matrix Mlp::forward(const Matrix& x) const { return forward(x, nullptr); }

Matrix Mlp::forward(const Matrix& x, MlpTrace* trace) const {
  if (x.cols() != in_dim()) {
    fail(ErrorKind::kInvalidInput,
         "MLP input width " + std::to_string(x.cols()) + " != " +
             std::to_string(in_dim()));
  }
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Matrix a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix pre = a * layers_[l].weight.transpose();
    pre.rowwise() += layers_[l].bias.row(0);
    if (trace) {
      trace->inputs.push_back(a);
      trace->pre.push_back(pre);
    }
    a = (l + 1 < layers_.size()) ? relu(pre) : pre;
  }
  return a;
}

Matrix Mlp::backward(const MlpTrace& trace, const Matrix& grad_out,
                     Mlp* grad) const {
  Matrix g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Matrix dpre = (i + 1 < layers_.size()) ? relu_mask(trace.pre[i], g) : g;
    if (grad) {
      grad->layers_[i].weight.noalias() += dpre.transpose() * trace.inputs[i];
      grad->layers_[i].bias += dpre.colwise().sum();
    }
    g = dpre * layers_[i].weight;
  }
  return g;
}

std::vector<ParamRef> Mlp::parameters(const std::string& prefix) {
  return collect_dense<ParamRef>(layers_, prefix);
}

std::vector<ConstParamRef> Mlp::parameters(const std::string& prefix) const {
  return collect_dense<ConstParamRef>(layers_, prefix);
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols())
      return false;
    if (x.weight != y.weight || x.bias != y.bias) return false;
  }
  return true;
}

int BackboneSpec::output_dim() const {
  if (kind == Kind::kIdentity || conv_channels.empty()) return input_dim();
  return conv_channels.back();
}

Backbone::Backbone(const BackboneSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.channels <= 0 || spec.height <= 0 || spec.width <= 0) {
    fail(ErrorKind::kInvalidConfiguration, "backbone input shape must be positive");
  }
  if (spec.kind != BackboneSpec::Kind::kConv) return;
  if (spec.conv_channels.empty()) {
    fail(ErrorKind::kInvalidConfiguration, "conv backbone needs at least one stage");
  }
  const int pools = static_cast<int>(spec.conv_channels.size()) - 1;
  if (spec.height % (1 << pools) != 0 || spec.width % (1 << pools) != 0) {
    fail(ErrorKind::kInvalidConfiguration,
         "conv backbone input size must be divisible by 2^(stages-1)");
  }
  int in = spec.channels;
  for (int out : spec.conv_channels) {
    const int fan_in = in * kKernel * kKernel;
    layers_.push_back({he_normal(out, fan_in, fan_in, rng), Matrix::Zero(1, out)});
    in = out;
  }
}

Backbone Backbone::zeros_like() const {
  Backbone b;
  b.spec_ = spec_;
  for (const auto& l : layers_) {
    b.layers_.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                         Matrix::Zero(1, l.bias.cols())});
  }
  return b;
}

Matrix Backbone::forward(const Matrix& x) const { return forward(x, nullptr); }

Matrix Backbone::forward(const Matrix& x, BackboneTrace* trace) const {
  if (x.cols() != input_dim()) {
    fail(ErrorKind::kInvalidInput,
         "backbone input width " + std::to_string(x.cols()) + " != " +
             std::to_string(input_dim()));
  }
  if (spec_.kind == BackboneSpec::Kind::kIdentity) return x;

  const Eigen::Index n = x.rows();
  Matrix out(n, output_dim());
  if (trace) {
    trace->cols.assign(n, {});
    trace->pre.assign(n, {});
  }
  const int hw0 = spec_.height * spec_.width;
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix fmap(spec_.channels, hw0);
    for (int c = 0; c < spec_.channels; ++c) {
      fmap.row(c) = x.row(i).segment(static_cast<Eigen::Index>(c) * hw0, hw0);
    }
    int h = spec_.height, w = spec_.width;
    for (std::size_t s = 0; s < layers_.size(); ++s) {
      Matrix cols = im2col(fmap, h, w);
      Matrix pre = layers_[s].weight * cols;
      pre.colwise() += layers_[s].bias.row(0).transpose();
      Matrix act = relu(pre);
      if (trace) {
        trace->cols[i].push_back(std::move(cols));
        trace->pre[i].push_back(pre);
      }
      if (s + 1 < layers_.size()) {
        fmap = avg_pool2(act, h, w);
        h /= 2;
        w /= 2;
      } else {
        out.row(i) = act.rowwise().mean().transpose();
      }
    }
  }
  return out;
}

void Backbone::backward(const BackboneTrace& trace, const Matrix& grad_out,
                        Backbone* grad) const {
  if (spec_.kind == BackboneSpec::Kind::kIdentity || !grad) return;
  const int stages = static_cast<int>(layers_.size());
  std::vector<int> hs(stages), ws(stages);
  hs[0] = spec_.height;
  ws[0] = spec_.width;
  for (int s = 1; s < stages; ++s) {
    hs[s] = hs[s - 1] / 2;
    ws[s] = ws[s - 1] / 2;
  }
  for (Eigen::Index i = 0; i < grad_out.rows(); ++i) {
    const int hw_last = hs[stages - 1] * ws[stages - 1];
    Matrix g = grad_out.row(i).transpose().replicate(1, hw_last) / hw_last;
    for (int s = stages - 1; s >= 0; --s) {
      const Matrix dpre = relu_mask(trace.pre[i][s], g);
      grad->layers_[s].weight.noalias() += dpre * trace.cols[i][s].transpose();
      grad->layers_[s].bias += dpre.rowwise().sum().transpose();
      if (s == 0) break;
      const Matrix dcols = layers_[s].weight.transpose() * dpre;
      const Matrix dpooled = col2im(dcols, static_cast<int>(layers_[s - 1].weight.rows()),
                                    hs[s], ws[s]);
      g = avg_unpool2(dpooled, hs[s - 1], ws[s - 1]);
    }
  }
}

std::vector<ParamRef> Backbone::parameters(const std::string& prefix) {
  return collect_dense<ParamRef>(layers_, prefix);
}

std::vector<ConstParamRef> Backbone::parameters(const std::string& prefix) const {
  return collect_dense<ConstParamRef>(layers_, prefix);
}

void Adam::step(const std::vector<ParamRef>& params,
                const std::vector<ConstParamRef>& grads) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::kInvalidInput, "Adam: parameter/gradient count mismatch");
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& g = *grads[k].value;
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[k].value->array() -=
        lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Vector log_sum_exp_rows(const Matrix& logits) {
  Vector out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    out(i) = mx + std::log((logits.row(i).array() - mx).exp().sum());
  }
  return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

std::uint64_t checksum(const std::vector<ConstParamRef>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value->data());
    const std::size_t n = static_cast<std::size_t>(p.value->size()) * sizeof(double);
    for (std::size_t k = 0; k < n; ++k) {
      h ^= bytes[k];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace sfda
