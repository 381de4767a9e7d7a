#include "test_util.hpp"

#include <sstream>

using namespace relife;

TEST(Config, ParsesKeysCommentsAndLists) {
  std::istringstream in(
      "# comment line\n"
      "M = 6\n"
      "beta = 0.25   # trailing comment\n"
      "mlp_widths = 32, 16\n"
      "variant = -SPM\n"
      "cpe_share_params = false\n"
      "synth.n_users = 40\n"
      "dcm.lambda = 0.5\n"
      "\n");
  const RunConfig c = parse_config(in);
  EXPECT_EQ(c.model.M, 6);
  EXPECT_EQ(c.model.beta, 0.25);
  EXPECT_EQ(c.model.mlp_widths, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.model.variant, Variant::no_spm);
  EXPECT_FALSE(c.model.cpe_share_params);
  EXPECT_EQ(c.synth.n_users, 40);
  EXPECT_EQ(c.synth.dcm.lambda, 0.5);
  EXPECT_EQ(c.model.N, ModelConfig{}.N);
}

TEST(Config, UnknownKeyNamesTheLine) {
  std::istringstream in("M = 4\nbogus = 1\n");
  try {
    parse_config(in);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  }
}

TEST(Config, MalformedValuesRejected) {
  for (const char* text : {"M = four\n", "beta = 0.5x\n", "cpe_share_params = maybe\n", "variant = -XYZ\n", "M 4\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_config(in), ConfigError) << text;
  }
}

TEST(Config, WriteThenParseRoundTrips) {
  RunConfig c;
  c.model.M = 7;
  c.model.tau = 0.123456789012345;
  c.model.vocab_sizes = {11, 5};
  c.model.variant = Variant::no_pat;
  c.synth.comparison_strength = 0.3;
  c.synth.dcm.seed = 99;
  std::stringstream buf;
  write_config(buf, c);
  const RunConfig back = parse_config(buf);
  EXPECT_EQ(back.model.M, 7);
  EXPECT_EQ(back.model.tau, c.model.tau);
  EXPECT_EQ(back.model.vocab_sizes, c.model.vocab_sizes);
  EXPECT_EQ(back.model.variant, Variant::no_pat);
  EXPECT_EQ(back.synth.comparison_strength, 0.3);
  EXPECT_EQ(back.synth.dcm.seed, 99u);
  EXPECT_EQ(config_hash(back.model), config_hash(c.model));
}

TEST(Config, ValidateNamesViolation) {
  ModelConfig cfg = relife::testing::tiny_config();
  cfg.heads = 3;  // d_x = 8 is not divisible by 3
  try {
    cfg.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("heads"), std::string::npos);
  }
  cfg = relife::testing::tiny_config();
  cfg.vocab_sizes.clear();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Config, HashTracksShapeFields) {
  const ModelConfig a = relife::testing::tiny_config();
  ModelConfig b = a;
  b.lr = 0.5;  // not a shape field
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.d_gru += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}
