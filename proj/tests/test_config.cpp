#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "rma/config.hpp"
#include "rma/errors.hpp"

using namespace rma;

TEST_CASE("defaults validate") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.train.model.attention.steps == 5);
  CHECK(c.train.adam.learning_rate == 1e-3);
  CHECK(c.train.loss.gamma == 0.1);
}

TEST_CASE("parsing skips comments and blank lines") {
  const auto s = parse_config_text("# header\n\nseed = 7\n  classes=3 \nchannels = 8, 16\n");
  REQUIRE(s.size() == 3);
  RunConfig c;
  apply_settings(c, s);
  CHECK(c.train.seed == 7);
  CHECK(c.data.seed == 7);
  CHECK(c.data.classes == 3);
  CHECK(c.train.model.attention.classes == 3);
  CHECK(c.train.model.backbone.channels == std::vector<std::size_t>{8, 16});
  CHECK(c.train.model.attention.feature_channels == 16);
}

TEST_CASE("errors name the origin and line") {
  try {
    parse_config_text("seed = 1\nbogus = 2\n", "run.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("run.cfg:2:") != std::string::npos);
    CHECK(what.find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("seed 1\n"), ConfigError);
  RunConfig c;
  CHECK_THROWS_AS(apply_setting(c, "epochs", "-3"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "learning_rate", "fast"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "use_anchor", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "views", "five"), ConfigError);
  CHECK_THROWS_AS(read_config_file("/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("format_config round-trips every key") {
  RunConfig c;
  apply_settings(c, parse_config_text("seed=9\nlearning_rate=0.00123\nalpha=0.45\nuse_scale=false\n"
                                      "steps=3\nregion=3\ncell_tanh=true\nviews=ten\ncrop=2\n"));
  const auto text = format_config(c);
  RunConfig d;
  apply_settings(d, parse_config_text(text));
  CHECK(format_config(d) == text);
  CHECK(d.train.adam.learning_rate == 0.00123);
  CHECK(d.train.model.attention.region_h == 3);
  CHECK(d.train.model.attention.region_w == 3);
  CHECK_FALSE(d.train.loss.use_scale);
  for (const auto& k : config_keys()) CHECK(text.find(k + " = ") != std::string::npos);
}

TEST_CASE("later settings win, so flags override the file") {
  const auto dir = testing_env::scratch("config_file");
  {
    std::ofstream(dir / "a.cfg") << "epochs = 12\nbatch_size = 4\n";
  }
  RunConfig c;
  apply_settings(c, read_config_file(dir / "a.cfg"));
  apply_setting(c, "epochs", "3");
  CHECK(c.train.epochs == 3);
  CHECK(c.train.batch_size == 4);
  write_effective_config(dir, c);
  RunConfig d;
  apply_settings(d, read_config_file(dir / "config.txt"));
  CHECK(format_config(d) == format_config(c));
}

TEST_CASE("validation catches inconsistent settings") {
  RunConfig c;
  SUBCASE("class count") { c.data.classes = 3; }
  SUBCASE("image size") { c.data.image_size = 20; }
  SUBCASE("top k") { c.top_k = 0; }
  SUBCASE("threshold") { c.threshold = 1.5; }
  SUBCASE("feature channels") { c.train.model.attention.feature_channels = 7; }
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
