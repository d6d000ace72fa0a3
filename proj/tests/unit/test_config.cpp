#include <gtest/gtest.h>

#include <filesystem>

#include "aglrls/config.hpp"
#include "aglrls/errors.hpp"
#include "aglrls/harness.hpp"

using namespace aglrls;

TEST(Config, DefaultsFollowTheTrainingRecipe) {
    const TrainConfig c;
    EXPECT_EQ(c.stage1_epochs, 15u);
    EXPECT_EQ(c.stage2_epochs, 20u);
    EXPECT_EQ(c.batch_size, 32u);
    EXPECT_EQ(c.lr_stage1, 1e-4);
    EXPECT_EQ(c.lr_stage2_fg, 1e-5);
    EXPECT_EQ(c.lr_stage2_d, 1e-4);
    EXPECT_EQ(c.lr_decay_epoch, 20u);
    EXPECT_EQ(c.momentum, 0.9);
    EXPECT_EQ(c.weight_decay, 5e-4);
    EXPECT_EQ(c.theta, 0.95);
    EXPECT_EQ(c.policy, ThresholdPolicy::idts);
    EXPECT_EQ(c.beta, kDefaultBalance);
    EXPECT_EQ(c.eta, kDefaultBalance);
    EXPECT_EQ(c.num_classes, 7u);
    EXPECT_EQ(c.d_patch, 16u);
    EXPECT_EQ(c.d_feature, 8u);
    EXPECT_EQ(c.strategies.size(), 9u);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesKeysCommentsAndLists) {
    const TrainConfig c = parse_config(
        "# a comment\n"
        "\n"
        "seed = 42   # trailing comment\n"
        "policy = sts\n"
        "theta=0.8\n"
        "beta = 1,2,3,4,5,6,7\n"
        "strategies = GLPC, Global\n"
        "shift_offset = 0.5\n"
        "priors = imbalanced\n"
        "adversarial = false\n"
        "target_priors = 0.5, 0.5, 0, 0, 0, 0, 0\n");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.policy, ThresholdPolicy::sts);
    EXPECT_EQ(c.theta, 0.8);
    EXPECT_EQ(c.beta, (ViewWeights{1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(c.strategies, (std::vector<Strategy>{Strategy::glpc, Strategy::global}));
    EXPECT_FALSE(c.adversarial);
    EXPECT_EQ(c.target_priors.size(), 7u);
}

TEST(Config, ErrorsCarryLineNumbers) {
    try {
        parse_config("seed = 1\n\nbogus = 3\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
    }
    try {
        parse_config("seed = -4\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
    EXPECT_THROW(parse_config("just words\n"), ParseError);
    EXPECT_THROW(parse_config("theta = 1.5\n"), ParseError);
    EXPECT_THROW(parse_config("beta = 1,2,3\n"), ParseError);
    EXPECT_THROW(parse_config("policy = XTS\n"), ParseError);
    EXPECT_THROW(parse_config("adversarial = maybe\n"), ParseError);
    EXPECT_THROW(parse_config("batch_size = 0\n"), ParseError);
    EXPECT_THROW(parse_config("shift_offset = 1,2\n"), ParseError);
}

TEST(Config, RenderRoundTripsAndHashes) {
    TrainConfig c;
    c.seed = 9;
    c.theta = 0.85;
    c.mean_scale = 1.0 / 3.0;
    c.strategies = {Strategy::con_iv, Strategy::voting};
    c.source_priors = {0.1, 0.2, 0.3, 0.1, 0.1, 0.1, 0.1};
    const std::string text = render_config(c);
    const TrainConfig back = parse_config(text);
    EXPECT_EQ(render_config(back), text);
    EXPECT_EQ(config_hash(back), config_hash(c));
    TrainConfig d = c;
    d.seed = 10;
    EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, LoadMissingFileThrows) {
    EXPECT_THROW(load_config("/nonexistent/aglrls.conf"), std::runtime_error);
}

TEST(Config, DerivedSpecs) {
    TrainConfig c;
    c.priors = "imbalanced";
    c.shift_offset = {2.0};
    c.source_count = 50;
    const DatasetSpec s = dataset_spec(c);
    EXPECT_EQ(s.source_priors, imbalanced_priors(7));
    EXPECT_EQ(s.shift.offset, std::vector<double>(16, 2.0));
    EXPECT_EQ(s.source_count, 50u);
    EXPECT_EQ(s.class_means.size(), 7u * 6u * 16u);
    EXPECT_EQ(dataset_spec(c).class_means, s.class_means);
    const ModelConfig m = model_config(c);
    EXPECT_EQ(m.view_dim(kGlobalLocalView), 48u);
    c.adversarial = false;
    for (double b : balance_weights(c).beta) EXPECT_EQ(b, 0.0);
}

TEST(Config, PresetFilesParse) {
    for (const char* name : {"shift_preset.conf", "imbalance_preset.conf", "tiny.conf"}) {
        EXPECT_NO_THROW(load_config(std::filesystem::path(AGLRLS_TEST_DATA) / name)) << name;
    }
}
