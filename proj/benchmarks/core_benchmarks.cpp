// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "sfda/compositor.hpp"
#include "sfda/deployment.hpp"
#include "sfda/harness/synthetic.hpp"
#include "sfda/nn.hpp"
#include "sfda/rng.hpp"

namespace {

void BM_SplineMask(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sfda::generate_spline_mask(side, side, seed++));
}
BENCHMARK(BM_SplineMask)->Arg(32)->Arg(128);

void BM_CompositePair(benchmark::State& state) {
  sfda::harness::SyntheticTaskSpec spec;
  const sfda::Image a = sfda::harness::render_source_image(spec, 0, 0, 1);
  const sfda::Image b = sfda::harness::render_source_image(spec, 1, 0, 1);
  const sfda::SplineMask mask = sfda::generate_spline_mask(a.height, a.width, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sfda::composite_pair(a, b, mask));
}
BENCHMARK(BM_CompositePair);

void BM_AdaptationLoss(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int cs = 6, k = 21;
  sfda::Rng rng(4);
  std::normal_distribution<double> normal;
  sfda::Matrix logits(batch, k);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = normal(rng);
  const std::vector<sfda::SsmWeight> ssm(batch, sfda::SsmWeight{1.5, 2.0});
  sfda::Matrix grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sfda::adaptation_loss(logits, ssm, cs, 0.1, &grad));
  }
}
BENCHMARK(BM_AdaptationLoss)->Arg(32)->Arg(256);

void BM_ConvBackboneForward(benchmark::State& state) {
  sfda::BackboneSpec spec;
  spec.kind = sfda::BackboneSpec::Kind::kConv;
  sfda::Rng rng(5);
  const sfda::Backbone backbone(spec, rng);
  std::uniform_real_distribution<double> unit;
  sfda::Matrix x(static_cast<Eigen::Index>(state.range(0)), spec.input_dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(backbone.forward(x));
}
BENCHMARK(BM_ConvBackboneForward)->Arg(1)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
