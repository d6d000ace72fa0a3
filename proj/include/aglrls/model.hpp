#pragma once

// Seven-view model: six per-region extractors, and seven classifier / discriminator heads
// over the views {g, le, re, ne, lm, rm, gl}, where gl is the concatenation of the first six.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aglrls/autodiff.hpp"
#include "aglrls/synthdata.hpp"
#include "aglrls/tensor.hpp"

namespace aglrls {

inline constexpr std::size_t kNumViews = 7;
inline constexpr std::size_t kGlobalView = 0;
inline constexpr std::size_t kGlobalLocalView = 6;

/// Short view labels in index order: g, le, re, ne, lm, rm, gl.
const std::array<std::string, kNumViews>& view_names();

struct ModelConfig {
    std::size_t d_patch = 16;
    std::size_t d_feature = 8;
    std::size_t hidden = 16;
    std::size_t num_classes = 7;

    std::size_t view_dim(std::size_t view) const { return view == kGlobalLocalView ? kNumRegions * d_feature : d_feature; }
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct FeatureSet {
    std::array<Tensor, kNumViews> f;
    friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

/// Per-view gradients w.r.t. a FeatureSet; same shapes as the features.
struct FeatureGrad {
    std::array<Tensor, kNumViews> f;
    static FeatureGrad zeros(const ModelConfig& config);
};

struct ModelBundle {
    ModelConfig config;
    std::array<Mlp, kNumRegions> extractors;
    std::array<Mlp, kNumViews> classifiers;
    std::array<Mlp, kNumViews> discriminators;  // logit output; sigmoid applied by discriminate_all

    /// Xavier-initialized 2-layer nets (hidden ReLU) for all twenty networks.
    static ModelBundle create(const ModelConfig& config, std::uint64_t seed);

    friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// Extractor activations for one sample, kept for backpropagation.
struct ExtractTrace {
    std::array<Activations, kNumRegions> extractor_acts;
    FeatureSet features;
};

ExtractTrace extract_traced(const ModelBundle& bundle, const RegionSample& sample);
FeatureSet extract(const ModelBundle& bundle, const RegionSample& sample);

/// 7 x c logits, row i = G_i(f_i).
Tensor classify_all(const ModelBundle& bundle, const FeatureSet& fs);

/// Source-probabilities D_i(f_i), each in (0,1).
std::array<double, kNumViews> discriminate_all(const ModelBundle& bundle, const FeatureSet& fs);

/// Folds the gl-view gradient back onto the six region features and backpropagates through the extractors.
void backprop_features(const ModelBundle& bundle, const ExtractTrace& trace, const FeatureGrad& grad,
                       std::array<MlpGrads, kNumRegions>& extractor_grads);

std::array<MlpGrads, kNumRegions> zero_extractor_grads(const ModelBundle& bundle);
std::array<MlpGrads, kNumViews> zero_head_grads(const std::array<Mlp, kNumViews>& heads);

/// Text checkpoint; 17 significant digits so the round trip is bit-exact.
void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const ModelBundle& bundle);
ModelBundle parse_checkpoint(const std::string& text);

}  // namespace aglrls
