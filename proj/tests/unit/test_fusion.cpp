#include <doctest.h>

#include "amaa/fusion.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace amaa;
using amaa::testing::max_abs_diff;
using amaa::testing::random_tensor;

namespace {

Tensor relu_of(Tensor t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
  return t;
}

// upsample -> conv3x3 + relu -> fuse, written out step by step.
Tensor manual_stage(const Tensor& prev, const Tensor& enc, const DecoderStage& s,
                    SkipFusion skip) {
  const Tensor up = ops::upsample2(prev, ops::UpsampleMode::kTrilinear);
  const Tensor f = relu_of(oracle::conv3d(up, s.conv_weight, s.conv_bias, 1));
  if (skip == SkipFusion::kNone) return f;
  if (skip == SkipFusion::kSum) {
    Tensor out = f;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += enc[i];
    return out;
  }
  const Tensor* proj = s.afg.projection ? &*s.afg.projection : nullptr;
  return oracle::afg_fuse(f, enc, s.afg.gate_weight, s.afg.gate_bias, proj, s.afg.alpha);
}

DecoderStage random_stage(SplitMix64& rng, std::size_t c_prev, std::size_t c_d, std::size_t c_e,
                          double alpha) {
  DecoderStage s;
  s.conv_weight = random_tensor(rng, {c_d, c_prev, 3, 3, 3}, -0.4, 0.4);
  s.conv_bias = random_tensor(rng, {c_d});
  s.afg.gate_weight = random_tensor(rng, {1, c_d + c_e, 1, 1, 1});
  s.afg.gate_bias = random_tensor(rng, {1});
  if (c_e != c_d) s.afg.projection = random_tensor(rng, {c_d, c_e, 1, 1, 1});
  s.afg.alpha = alpha;
  return s;
}

}  // namespace

TEST_SUITE("adaptive_fusion") {

TEST_CASE("gate values") {
  SplitMix64 rng(91);
  const Tensor f = random_tensor(rng, {2, 2, 2, 2}), e = random_tensor(rng, {2, 2, 2, 2});
  AfgParams p{Tensor({1, 4, 1, 1, 1}), Tensor({1}), std::nullopt, 0.75};
  const Tensor half = afg_gate(f, e, p);
  CHECK(half.shape() == Shape{1, 2, 2, 2});
  for (double m : half.values()) CHECK(m == 0.5);
  p.gate_bias[0] = 20.0;
  const Tensor open = afg_gate(f, e, p);
  for (double m : open.values()) CHECK(std::abs(m - 1.0) <= 1e-8);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SplitMix64 r(seed);
    const Tensor a = random_tensor(r, {3, 2, 3, 2}), b = random_tensor(r, {2, 2, 3, 2});
    const AfgParams q{random_tensor(r, {1, 5, 1, 1, 1}), random_tensor(r, {1}), std::nullopt, 1.0};
    const Tensor m = afg_gate(a, b, q);
    const Tensor logits = oracle::conv1(oracle::concat(a, b), q.gate_weight, q.gate_bias);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(std::abs(m[i] - oracle::sig(logits[i])) <= 1e-12);
      CHECK(m[i] > 0.0);
      CHECK(m[i] < 1.0);
    }
  }
  CHECK_THROWS_AS(afg_gate(f, Tensor({2, 2, 2, 3}), p), ShapeError);
}

TEST_CASE("fusion: alpha 0, open gate, oracle, injection bound") {
  SplitMix64 rng(92);
  const Tensor f = random_tensor(rng, {2, 2, 3, 2}), e = random_tensor(rng, {2, 2, 3, 2});
  AfgParams p{random_tensor(rng, {1, 4, 1, 1, 1}), random_tensor(rng, {1}), std::nullopt, 0.0};
  CHECK(afg_fuse(f, e, p).bit_equal(f));

  AfgParams open{Tensor({1, 4, 1, 1, 1}), Tensor({1}, 20.0), std::nullopt, 0.75};
  const Tensor fo = afg_fuse(f, e, open);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(fo[i] - (f[i] + 0.75 * e[i])) <= 1e-6);

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SplitMix64 r(seed);
    const bool project = seed % 2 == 0;
    const std::size_t ce = project ? 3 : 2;
    const Tensor a = random_tensor(r, {2, 2, 2, 3}), b = random_tensor(r, {ce, 2, 2, 3});
    AfgParams q{random_tensor(r, {1, 2 + ce, 1, 1, 1}), random_tensor(r, {1}), std::nullopt, 0.75};
    if (project) q.projection = random_tensor(r, {2, ce, 1, 1, 1});
    const Tensor* proj = project ? &*q.projection : nullptr;
    const Tensor got = afg_fuse(a, b, q);
    CHECK(max_abs_diff(got, oracle::afg_fuse(a, b, q.gate_weight, q.gate_bias, proj, 0.75)) <= 1e-12);
    const Tensor pv = project ? oracle::conv1(b, *proj, Tensor({2})) : b;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - a[i]) <= 0.75 * std::abs(pv[i]) + 1e-15);
    }
  }
  AfgParams missing{Tensor({1, 5, 1, 1, 1}), Tensor({1}), std::nullopt, 0.75};
  CHECK_THROWS_AS(afg_fuse(f, Tensor({3, 2, 3, 2}), missing), ConfigError);
}

TEST_CASE("decoder hierarchy") {
  SplitMix64 rng(93);
  const Tensor bottleneck = random_tensor(rng, {3, 1, 1, 2});
  const Tensor enc0 = random_tensor(rng, {2, 2, 2, 4});
  const Tensor enc1 = random_tensor(rng, {2, 4, 4, 8});
  const DecoderStage s0 = random_stage(rng, 3, 2, 2, 0.75);
  const DecoderStage s1 = random_stage(rng, 2, 2, 2, 0.75);

  const Tensor one = decode_hierarchy(bottleneck, {enc0}, {s0});
  CHECK(max_abs_diff(one, manual_stage(bottleneck, enc0, s0, SkipFusion::kGated)) <= 1e-12);

  const Tensor two = decode_hierarchy(bottleneck, {enc0, enc1}, {s0, s1});
  const Tensor want =
      manual_stage(manual_stage(bottleneck, enc0, s0, SkipFusion::kGated), enc1, s1, SkipFusion::kGated);
  CHECK(two.shape() == Shape{2, 4, 4, 8});
  CHECK(max_abs_diff(two, want) <= 1e-12);

  for (auto skip : {SkipFusion::kSum, SkipFusion::kNone}) {
    DecoderOptions o;
    o.skip = skip;
    const Tensor got = decode_hierarchy(bottleneck, {enc0, enc1}, {s0, s1}, o);
    CHECK(max_abs_diff(got, manual_stage(manual_stage(bottleneck, enc0, s0, skip), enc1, s1, skip)) <=
          1e-12);
  }

  DecoderStage z0 = s0, z1 = s1;
  z0.afg.alpha = z1.afg.alpha = 0.0;
  DecoderOptions none;
  none.skip = SkipFusion::kNone;
  CHECK(decode_hierarchy(bottleneck, {enc0, enc1}, {z0, z1})
            .bit_equal(decode_hierarchy(bottleneck, {enc0, enc1}, {z0, z1}, none)));

  CHECK_THROWS_AS(decode_hierarchy(bottleneck, {enc0}, {s0, s1}), ConfigError);
}

}  // TEST_SUITE
