#include <gtest/gtest.h>

#include <sstream>

#include "caumvc/config.hpp"

using namespace caumvc;

TEST(Config, DefaultsValid) {
  const TrainConfig c;
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.alpha, 1.0);
  EXPECT_EQ(c.beta, 1.0);
  EXPECT_EQ(c.lr, 0.003);
  EXPECT_EQ(c.epochs, 500u);
  EXPECT_EQ(c.batch_size, 256u);
  EXPECT_EQ(c.warm_fraction, 0.2);
  EXPECT_EQ(c.mc_samples_train, 1u);
  EXPECT_EQ(c.mc_samples_infer, 8u);
}

TEST(Config, ParseKeysAndComments) {
  std::istringstream in("# comment\nalpha = 0.5\n\n beta=2\nlr = 0.005\nepochs = 0\nablation = no_con\nseed = 18446744073709551615\n");
  const TrainConfig c = parse_config(in);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.beta, 2.0);
  EXPECT_EQ(c.lr, 0.005);
  EXPECT_EQ(c.epochs, 0u);
  EXPECT_EQ(c.ablation, Ablation::kNoCon);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
}

TEST(Config, Errors) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_config(in);
  };
  EXPECT_THROW(parse("gamma = 1\n"), ParseError);
  EXPECT_THROW(parse("alpha 1\n"), ParseError);
  EXPECT_THROW(parse("alpha = x\n"), ParseError);
  EXPECT_THROW(parse("epochs = -1\n"), ParseError);
  EXPECT_THROW(parse("alpha = -1\n"), ArgumentError);
  EXPECT_THROW(parse("lr = 0\n"), ArgumentError);
  EXPECT_THROW(parse("batch_size = 1\n"), ArgumentError);
  EXPECT_THROW(parse("d = 0\n"), ArgumentError);
  EXPECT_THROW(parse("ablation = none\n"), ArgumentError);
  EXPECT_THROW(parse("normalize = maybe\n"), ParseError);
  EXPECT_THROW(parse("intervention_fraction = 1.5\n"), ArgumentError);
  try {
    parse("alpha = 1\nbogus = 2\n");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(Config, FormatRoundTrip) {
  TrainConfig c;
  c.alpha = 0.1;
  c.k = 7;
  c.seed = 123456789012345ull;
  c.ablation = Ablation::kNoCauCon;
  c.normalize = false;
  c.intervention_fraction = 0.25;
  std::istringstream in(format_config(c));
  EXPECT_EQ(parse_config(in), c);
}

TEST(Ablation, Names) {
  for (Ablation a : {Ablation::kFull, Ablation::kNoCau, Ablation::kNoCon, Ablation::kNoCauCon}) {
    EXPECT_EQ(parse_ablation(ablation_name(a)), a);
  }
  EXPECT_TRUE(uses_causal_branch(Ablation::kNoCon));
  EXPECT_FALSE(uses_causal_branch(Ablation::kNoCau));
}
