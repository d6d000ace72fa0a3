#pragma once

// Training losses and the two-player alternation.
//
//   L(F,D) = sum_i beta_i * ( mean_s -log D_i(f_i^s) + mean_t -log(1 - D_i(f_i^t)) )
//   L(F,G) = sum_i eta_i  * ( mean_s CE(G_i(f_i^s), y^s) + mean_{t: y_hat_i != -1} CE(G_i(f_i^t), y_hat_i) )
//
// One round = a D step on L(F,D), pseudo-labelling of weakly augmented target samples,
// then an F,G step on L(F,G) - L(F,D) with the target CE taken on strongly augmented copies.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aglrls/autodiff.hpp"
#include "aglrls/fplg.hpp"
#include "aglrls/model.hpp"
#include "aglrls/synthdata.hpp"

namespace aglrls {

using ViewWeights = std::array<double, kNumViews>;

inline constexpr ViewWeights kDefaultBalance{7, 1, 1, 1, 1, 1, 7};

struct BalanceWeights {
    ViewWeights beta = kDefaultBalance;
    ViewWeights eta = kDefaultBalance;
    double reversal = 1.0;  // scale on -dL(F,D)/dF seen by the extractors; 1 is the plain minimax
};

struct DiscriminatorLoss {
    double loss = 0.0;
    ViewWeights per_view{};  // unweighted per-view BCE sums of the two means
    std::array<MlpGrads, kNumViews> disc_grads;
    std::vector<FeatureGrad> source_feature_grads;
    std::vector<FeatureGrad> target_feature_grads;
};

/// Throws std::invalid_argument on an empty batch.
DiscriminatorLoss discriminator_loss(const ModelBundle& bundle, std::span<const FeatureSet> source_features,
                                     std::span<const FeatureSet> target_features, const ViewWeights& beta);

struct ClassificationLoss {
    double loss = 0.0;
    double source_loss = 0.0;  // eta-weighted
    double target_loss = 0.0;  // eta-weighted
    ViewWeights per_view_source{};
    ViewWeights per_view_target{};
    std::array<std::size_t, kNumViews> target_counts{};  // labelled target entries per view
    std::array<MlpGrads, kNumViews> classifier_grads;
    std::vector<FeatureGrad> source_feature_grads;
    std::vector<FeatureGrad> target_feature_grads;
};

/// Target entries whose pseudo label is -1 are skipped per view; each view's target mean runs over
/// its labelled entries only (zero when there are none).
ClassificationLoss classification_loss(const ModelBundle& bundle, std::span<const FeatureSet> source_features,
                                       std::span<const int> source_labels, std::span<const FeatureSet> target_features,
                                       std::span<const PseudoLabelSet> pseudo_labels, const ViewWeights& eta);

struct BundleOptimizer {
    std::array<OptimState, kNumRegions> extractors;
    std::array<OptimState, kNumViews> classifiers;
    std::array<OptimState, kNumViews> discriminators;

    static BundleOptimizer create(const ModelBundle& bundle, double lr_feature_classifier, double lr_discriminator,
                                  double momentum, double weight_decay);
    void set_learning_rates(double lr_feature_classifier, double lr_discriminator);
};

struct BatchLosses {
    double disc_loss = 0.0;
    double cls_loss_source = 0.0;
    double cls_loss_target = 0.0;
    ViewWeights disc_per_view{};
    ViewWeights cls_source_per_view{};
    ViewWeights cls_target_per_view{};
};

/// Gradients of L(F,G) - L(F,D) w.r.t. extractors and classifiers, plus the pieces that produced them.
struct FeatureClassifierGrads {
    std::array<MlpGrads, kNumRegions> extractors;
    std::array<MlpGrads, kNumViews> classifiers;
    ClassificationLoss classification;
    double adversarial_loss = 0.0;  // L(F,D) at the current discriminators
};

/// `target_cls` are the strongly augmented target traces, `target_adv` the weakly augmented ones.
FeatureClassifierGrads feature_classifier_gradients(const ModelBundle& bundle, std::span<const ExtractTrace> source,
                                                    std::span<const int> source_labels,
                                                    std::span<const ExtractTrace> target_cls,
                                                    std::span<const PseudoLabelSet> pseudo_labels,
                                                    std::span<const ExtractTrace> target_adv,
                                                    const BalanceWeights& weights);

struct RoundOptions {
    std::uint64_t augment_seed = 0;
    double weak_sigma = kWeakSigma;
    double strong_sigma = kStrongSigma;
    double strong_dropout = kStrongDropout;
    bool pseudo_labels = true;  // false: target CE term is off and sigma never moves
};

struct RoundResult {
    BatchLosses losses;
    std::vector<PseudoLabelSet> pseudo_labels;  // one per target sample, all -1 when disabled
};

/// Source samples must carry labels. Order: D step, pseudo labels (sigma updated), F,G step.
RoundResult adversarial_round(ModelBundle& bundle, std::span<const RegionSample> source_batch,
                              std::span<const RegionSample> target_batch, const BalanceWeights& weights,
                              BundleOptimizer& optim, PseudoState& pseudo_state, const RoundOptions& options);

/// Source-only F,G step on the eta-weighted source CE. Returns the loss before the step.
double supervised_round(ModelBundle& bundle, std::span<const RegionSample> source_batch, const ViewWeights& eta,
                        BundleOptimizer& optim);

std::vector<int> source_labels_of(std::span<const RegionSample> batch);

}  // namespace aglrls
