/*
 * Copyright 2026 The lesionfuse Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "lesionfuse/data_model.hpp"
#include "lesionfuse/evaluation.hpp"
#include "lesionfuse/fusion.hpp"
#include "lesionfuse/nn/layers.hpp"
#include "lesionfuse/preprocess.hpp"
#include "lesionfuse/stats.hpp"

namespace {

using namespace lesionfuse;

void BM_Conv3x3(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  nn::Conv2d conv({.in_channels = 16, .out_channels = 16, .kernel = 3, .padding = 1}, rng);
  nn::Tensor x({16, side, side}, 0.5);
  nn::RunContext ctx{.training = false, .record = false};
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, ctx));
  state.SetItemsProcessed(state.iterations() * 16 * 16 * 9 * side * side);
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(32)->Arg(64);

void BM_FusionHead(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const double cf = static_cast<double>(state.range(0)) / 100.0;
  FusionHead head(build_head({.cf = cf, .backbone_dim = 2048, .scenario = Scenario::fused,
                              .dropout = kHeadDropout, .vgg_intermediate = std::nullopt}),
                  rng);
  nn::Tensor x({2048}, 0.1);
  ClinicalRecord rec;
  rec.age = 50;
  const auto clinical = encode_clinical(rec);
  for (auto _ : state) benchmark::DoNotOptimize(fuse_forward(x, &clinical, head, Mode::eval));
}
BENCHMARK(BM_FusionHead)->Arg(50)->Arg(90);

void BM_ClinicalEncode(benchmark::State& state) {
  ClinicalRecord rec;
  rec.age = 70;
  rec.region = Region::face;
  rec.itch = true;
  for (auto _ : state) benchmark::DoNotOptimize(encode_clinical(rec));
}
BENCHMARK(BM_ClinicalEncode);

void BM_ShadesOfGray(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(224, 224);
  for (auto& v : img.data) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(shades_of_gray(img));
}
BENCHMARK(BM_ShadesOfGray);

void BM_BinaryAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores(n);
  std::unique_ptr<bool[]> positive(new bool[n]);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u(rng);
    positive[i] = i % 7 == 0;
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(binary_auc(scores, std::span<const bool>(positive.get(), n)));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BinaryAuc)->Range(64, 1 << 14)->Complexity();

void BM_WilcoxonExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(n), b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i] = (i % 2 ? 1.0 : -0.7) * static_cast<double>(i + 1);
  for (auto _ : state) benchmark::DoNotOptimize(wilcoxon_signed_rank(a, b, WilcoxonMethod::exact));
}
BENCHMARK(BM_WilcoxonExact)->Arg(5)->Arg(15)->Arg(25);

}  // namespace

BENCHMARK_MAIN();
