#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "rma/checkpoint.hpp"
#include "rma/errors.hpp"

using namespace rma;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Tensor> tensors_of(const Model<float>& m) {
  std::vector<Tensor> out;
  m.visit([&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

}  // namespace

TEST_CASE("raw tensor files round-trip") {
  const auto dir = testing_env::scratch("ckpt_raw");
  const std::vector<NamedTensor> ts = {{"a", Tensor::from({2, 2}, {1, -2, 3.5f, 1e-30f})},
                                       {"scalar.b", Tensor(Shape{1}, 7.0f)},
                                       {"c", Tensor(Shape{3, 1, 2}, -0.25f)}};
  write_tensors(dir / "t.rma", ts);
  CHECK(read_tensors(dir / "t.rma") == ts);
}

TEST_CASE("model checkpoint is bit-exact, with and without optimizer state") {
  const auto dir = testing_env::scratch("ckpt_model");
  ModelConfig cfg;
  cfg.attention.steps = 3;
  cfg.attention.classes = 6;
  const auto model = init_model(cfg, 11);
  save_checkpoint(model, nullptr, dir / "m.rma");
  auto back = load_checkpoint(dir / "m.rma");
  CHECK(back.model.config == cfg);
  CHECK(tensors_of(back.model) == tensors_of(model));
  CHECK_FALSE(back.optimizer.has_value());

  auto state = AdamState::for_model(model, {});
  auto grads = model.zeros_like();
  grads.visit([](const std::string&, Tensor& t) { t.fill(0.3f); });
  auto stepped = model;
  adam_step(stepped, grads, state);
  save_checkpoint(stepped, &state, dir / "s.rma");
  back = load_checkpoint(dir / "s.rma");
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step == state.step);
  CHECK(back.optimizer->first_moment == state.first_moment);
  CHECK(back.optimizer->second_moment == state.second_moment);
  CHECK(tensors_of(back.model) == tensors_of(stepped));

  // Saving what was loaded gives the same bytes.
  save_checkpoint(back.model, &*back.optimizer, dir / "s2.rma");
  CHECK(slurp(dir / "s.rma") == slurp(dir / "s2.rma"));
}

TEST_CASE("corrupted files raise FormatError") {
  const auto dir = testing_env::scratch("ckpt_bad");
  save_checkpoint(init_model({}, 1), nullptr, dir / "good.rma");
  const auto bytes = slurp(dir / "good.rma");

  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    spit(dir / "bad.rma", b);
  }
  SUBCASE("unsupported version") {
    auto b = bytes;
    b[4] = 9;
    spit(dir / "bad.rma", b);
  }
  SUBCASE("truncated header") {
    spit(dir / "bad.rma", std::vector<char>(bytes.begin(), bytes.begin() + 6));
  }
  SUBCASE("truncated payload") {
    spit(dir / "bad.rma", std::vector<char>(bytes.begin(), bytes.end() - 3));
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back(0);
    spit(dir / "bad.rma", b);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.rma"), FormatError);
}

TEST_CASE("missing or misshapen parameters are rejected") {
  const auto dir = testing_env::scratch("ckpt_missing");
  save_checkpoint(init_model({}, 1), nullptr, dir / "m.rma");
  auto ts = read_tensors(dir / "m.rma");

  SUBCASE("missing") {
    std::erase_if(ts, [](const NamedTensor& t) { return t.name == "attention.score.bias"; });
  }
  SUBCASE("wrong shape") {
    for (auto& t : ts) {
      if (t.name == "backbone.conv1.bias") t.tensor = Tensor(Shape{5}, 0.0f);
    }
  }
  write_tensors(dir / "edited.rma", ts);
  CHECK_THROWS_AS(load_checkpoint(dir / "edited.rma"), FormatError);
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.rma"), Error);
}

TEST_CASE("architecture descriptor round-trips") {
  ModelConfig cfg;
  cfg.backbone.channels = {8, 12};
  cfg.attention.feature_channels = 12;
  cfg.attention.region_h = 3;
  cfg.attention.region_w = 2;
  cfg.attention.cell_tanh = true;
  CHECK(decode_arch(encode_arch(cfg)) == cfg);
}
