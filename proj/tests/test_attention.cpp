#include <doctest.h>

#include "rma/attention.hpp"
#include "rma/errors.hpp"

using namespace rma;

namespace {

Tensor features(const AttentionArch& arch, std::uint64_t seed) {
  Rng rng(seed);
  Tensor f(Shape{arch.feature_channels, 4, 4});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(rng.uniform(0, 1));
  return f;
}

}  // namespace

TEST_CASE("episodes emit K scores from K+1 iterations for K = 1..6") {
  for (std::size_t k = 1; k <= 6; ++k) {
    AttentionArch arch;
    arch.steps = k;
    Rng rng(k);
    const auto w = init_attention(arch, rng);
    const auto trace = run_episode(features(arch, 10 + k), w, arch);
    CHECK(trace.scores.size() == k);
    CHECK(trace.states.size() == k + 1);
    CHECK(trace.transforms.size() == k + 1);
    CHECK(trace.transforms.front() == TransformParams::identity());
    CHECK(trace.fused.size() == arch.classes);
  }
}

TEST_CASE("fresh weights predict identity transforms") {
  AttentionArch arch;
  Rng rng(2);
  const auto w = init_attention(arch, rng);
  const auto trace = run_episode(features(arch, 3), w, arch);
  for (const auto& t : trace.transforms) CHECK(t == TransformParams::identity());
  CHECK(trace.discarded == TransformParams::identity());
}

TEST_CASE("fusion is the per-class maximum over regions") {
  const std::vector<std::vector<double>> s{{0.1, 2.0, -1.0}, {0.5, 1.0, -3.0}, {0.2, 1.5, -2.0}};
  CHECK(fuse_scores(s) == std::vector<double>{0.5, 2.0, -1.0});
  CHECK_THROWS_AS(fuse_scores(std::vector<std::vector<double>>{}), ProtocolError);

  AttentionArch arch;
  arch.steps = 4;
  Rng rng(5);
  const auto trace = run_episode(features(arch, 6), init_attention(arch, rng), arch);
  CHECK(fuse_scores(trace.scores) == trace.fused);
}

TEST_CASE("cell_tanh changes the recurrence") {
  AttentionArch arch;
  Rng a(7), b(7);
  const auto w = init_attention(arch, a);
  auto arch_t = arch;
  arch_t.cell_tanh = true;
  const auto f = features(arch, 8);
  const auto plain = run_episode(f, w, arch);
  const auto tanh = run_episode(f, w, arch_t);
  CHECK(plain.states[1].hidden != tanh.states[1].hidden);
  (void)b;
}

TEST_CASE("configuration errors") {
  AttentionArch arch;
  arch.steps = 0;
  CHECK_THROWS_AS(arch.validate(), ConfigError);
  arch.steps = 5;
  arch.hidden = 0;
  CHECK_THROWS_AS(arch.validate(), ConfigError);

  AttentionArch ok;
  Rng rng(1);
  const auto w = init_attention(ok, rng);
  AttentionArch other = ok;
  other.feature_channels = 16;
  CHECK_THROWS_AS(run_episode(features(other, 1), w, ok), ConfigError);
}
