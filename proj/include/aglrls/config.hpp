#pragma once

// Flat `key = value` experiment configuration. `#` starts a comment; unknown keys are errors.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aglrls/fplg.hpp"
#include "aglrls/glpc.hpp"
#include "aglrls/objectives.hpp"
#include "aglrls/synthdata.hpp"

namespace aglrls {

struct TrainConfig {
    // data
    std::size_t num_classes = 7;
    std::size_t d_patch = 16;
    std::size_t source_count = 2000;
    std::size_t target_count = 2000;
    std::string priors = "uniform";     // uniform | imbalanced, used where the lists below are empty
    std::vector<double> source_priors;
    std::vector<double> target_priors;
    double mean_scale = 1.0;
    double global_scale = 1.0;  // extra factor on the global-region class means
    double source_noise = 1.0;
    double target_noise = 1.0;
    double target_occlusion = 0.0;
    double shift_angle = 0.6;
    std::vector<double> shift_offset{1.0};  // one value broadcasts to every coordinate
    std::string source_data;  // dataset files override generation when set
    std::string target_data;

    // model
    std::size_t d_feature = 8;
    std::size_t hidden = 16;

    // optimisation; effective learning rate = lr_* x lr_scale
    std::size_t stage1_epochs = 15;
    std::size_t stage2_epochs = 20;
    std::size_t batch_size = 32;
    double lr_stage1 = 1e-4;
    double lr_stage2_fg = 1e-5;
    double lr_stage2_d = 1e-4;
    double lr_scale = 10.0;
    std::size_t lr_decay_epoch = 20;
    double momentum = 0.9;
    double weight_decay = 5e-4;

    // pseudo labels and losses
    double theta = kDefaultTheta;
    ThresholdPolicy policy = ThresholdPolicy::idts;
    ViewWeights beta = kDefaultBalance;
    ViewWeights eta = kDefaultBalance;
    bool adversarial = true;
    double adv_coeff = 1.0;  // peak scale of the reversed discriminator gradient
    bool adv_ramp = true;    // ramp the scale as 2/(1+exp(-10p))-1 over stage-2 progress p
    bool pseudo_labels = true;
    std::size_t pseudo_start_epoch = 10;  // stage-2 epoch at which pseudo-labelling switches on
    double weak_sigma = kWeakSigma;
    double strong_sigma = kStrongSigma;
    double strong_dropout = kStrongDropout;

    std::uint64_t seed = 0;
    std::vector<Strategy> strategies = all_strategies();

    // simulate-fplg
    std::vector<double> theta_grid{0.99, 0.95, 0.90, 0.85, 0.80};
    std::string simulate_mode = "replay";  // replay | full
    std::size_t simulate_epochs = 20;

    /// Throws std::invalid_argument on violated invariants.
    void validate() const;
};

/// Throws ParseError (with line number) on syntax errors, unknown keys or bad values.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Every key in a fixed order; parse_config(render_config(c)) reproduces c.
std::string render_config(const TrainConfig& config);

/// FNV-1a over render_config.
std::uint64_t config_hash(const TrainConfig& config);

DatasetSpec dataset_spec(const TrainConfig& config);
ModelConfig model_config(const TrainConfig& config);
BalanceWeights balance_weights(const TrainConfig& config);

}  // namespace aglrls
