#include "aglrls/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aglrls/errors.hpp"

namespace aglrls {

namespace {

std::vector<FeatureGrad> zero_feature_grads(const ModelConfig& config, std::size_t n) {
    return std::vector<FeatureGrad>(n, FeatureGrad::zeros(config));
}

// Adds scale * BCE(sigmoid(D_v(f)), flag) into the running gradients; returns the unscaled loss.
double accumulate_bce(const Mlp& disc, const Tensor& feature, int flag, double scale, MlpGrads& disc_grads,
                      Tensor& feature_grad) {
    const Activations acts = mlp_forward(disc, feature);
    const ScalarLossAndGrad bce = binary_cross_entropy_logit(acts.output()[0], flag);
    const double dlogit = scale * bce.grad;
    if (dlogit != 0.0) {
        const Tensor g = mlp_backward(disc, acts, Tensor::vector({dlogit}), disc_grads);
        for (std::size_t j = 0; j < g.size(); ++j) feature_grad[j] += g[j];
    }
    return bce.loss;
}

double accumulate_ce(const Mlp& cls, const Tensor& feature, int label, double scale, MlpGrads& cls_grads,
                     Tensor& feature_grad) {
    const Activations acts = mlp_forward(cls, feature);
    LossAndGrad ce = cross_entropy(acts.output().values(), static_cast<std::size_t>(label));
    if (scale != 0.0) {
        for (double& g : ce.grad) g *= scale;
        const Tensor g = mlp_backward(cls, acts, Tensor::vector(std::move(ce.grad)), cls_grads);
        for (std::size_t j = 0; j < g.size(); ++j) feature_grad[j] += g[j];
    }
    return ce.loss;
}

std::vector<FeatureSet> features_of(std::span<const ExtractTrace> traces) {
    std::vector<FeatureSet> fs;
    fs.reserve(traces.size());
    for (const auto& t : traces) fs.push_back(t.features);
    return fs;
}

}  // namespace

DiscriminatorLoss discriminator_loss(const ModelBundle& bundle, std::span<const FeatureSet> source_features,
                                     std::span<const FeatureSet> target_features, const ViewWeights& beta) {
    if (source_features.empty() || target_features.empty()) {
        throw std::invalid_argument("discriminator_loss needs nonempty source and target batches");
    }
    DiscriminatorLoss out;
    out.disc_grads = zero_head_grads(bundle.discriminators);
    out.source_feature_grads = zero_feature_grads(bundle.config, source_features.size());
    out.target_feature_grads = zero_feature_grads(bundle.config, target_features.size());
    const double ns = static_cast<double>(source_features.size());
    const double nt = static_cast<double>(target_features.size());
    for (std::size_t v = 0; v < kNumViews; ++v) {
        double src = 0.0;
        double tgt = 0.0;
        for (std::size_t k = 0; k < source_features.size(); ++k) {
            src += accumulate_bce(bundle.discriminators[v], source_features[k].f[v], 1, beta[v] / ns,
                                  out.disc_grads[v], out.source_feature_grads[k].f[v]);
        }
        for (std::size_t k = 0; k < target_features.size(); ++k) {
            tgt += accumulate_bce(bundle.discriminators[v], target_features[k].f[v], 0, beta[v] / nt,
                                  out.disc_grads[v], out.target_feature_grads[k].f[v]);
        }
        out.per_view[v] = src / ns + tgt / nt;
        out.loss += beta[v] * out.per_view[v];
    }
    return out;
}

ClassificationLoss classification_loss(const ModelBundle& bundle, std::span<const FeatureSet> source_features,
                                       std::span<const int> source_labels, std::span<const FeatureSet> target_features,
                                       std::span<const PseudoLabelSet> pseudo_labels, const ViewWeights& eta) {
    if (source_features.size() != source_labels.size()) throw DimensionError("one label per source sample");
    if (target_features.size() != pseudo_labels.size()) throw DimensionError("one pseudo label set per target sample");
    const auto c = static_cast<int>(bundle.config.num_classes);
    for (int y : source_labels) {
        if (y < 0 || y >= c) throw std::invalid_argument("source label " + std::to_string(y) + " out of range");
    }

    ClassificationLoss out;
    out.classifier_grads = zero_head_grads(bundle.classifiers);
    out.source_feature_grads = zero_feature_grads(bundle.config, source_features.size());
    out.target_feature_grads = zero_feature_grads(bundle.config, target_features.size());

    for (std::size_t v = 0; v < kNumViews; ++v) {
        const Mlp& g = bundle.classifiers[v];
        if (!source_features.empty()) {
            const double ns = static_cast<double>(source_features.size());
            double sum = 0.0;
            for (std::size_t k = 0; k < source_features.size(); ++k) {
                sum += accumulate_ce(g, source_features[k].f[v], source_labels[k], eta[v] / ns, out.classifier_grads[v],
                                     out.source_feature_grads[k].f[v]);
            }
            out.per_view_source[v] = sum / ns;
        }
        std::size_t count = 0;
        for (const auto& pl : pseudo_labels) {
            if (pl.y_hat[v] != kNoLabel) ++count;
        }
        out.target_counts[v] = count;
        if (count > 0) {
            const double nt = static_cast<double>(count);
            double sum = 0.0;
            for (std::size_t k = 0; k < target_features.size(); ++k) {
                const int y = pseudo_labels[k].y_hat[v];
                if (y == kNoLabel) continue;
                if (y < 0 || y >= c) throw std::invalid_argument("pseudo label out of range");
                sum += accumulate_ce(g, target_features[k].f[v], y, eta[v] / nt, out.classifier_grads[v],
                                     out.target_feature_grads[k].f[v]);
            }
            out.per_view_target[v] = sum / nt;
        }
        out.source_loss += eta[v] * out.per_view_source[v];
        out.target_loss += eta[v] * out.per_view_target[v];
    }
    out.loss = out.source_loss + out.target_loss;
    return out;
}

BundleOptimizer BundleOptimizer::create(const ModelBundle& bundle, double lr_fc, double lr_d, double momentum,
                                        double weight_decay) {
    BundleOptimizer o;
    for (std::size_t r = 0; r < kNumRegions; ++r) o.extractors[r] = OptimState(bundle.extractors[r], lr_fc, momentum, weight_decay);
    for (std::size_t v = 0; v < kNumViews; ++v) {
        o.classifiers[v] = OptimState(bundle.classifiers[v], lr_fc, momentum, weight_decay);
        o.discriminators[v] = OptimState(bundle.discriminators[v], lr_d, momentum, weight_decay);
    }
    return o;
}

void BundleOptimizer::set_learning_rates(double lr_fc, double lr_d) {
    for (auto& s : extractors) s.learning_rate = lr_fc;
    for (auto& s : classifiers) s.learning_rate = lr_fc;
    for (auto& s : discriminators) s.learning_rate = lr_d;
}

FeatureClassifierGrads feature_classifier_gradients(const ModelBundle& bundle, std::span<const ExtractTrace> source,
                                                    std::span<const int> source_labels,
                                                    std::span<const ExtractTrace> target_cls,
                                                    std::span<const PseudoLabelSet> pseudo_labels,
                                                    std::span<const ExtractTrace> target_adv,
                                                    const BalanceWeights& weights) {
    FeatureClassifierGrads out;
    out.extractors = zero_extractor_grads(bundle);

    const auto src_fs = features_of(source);
    const auto cls_fs = features_of(target_cls);
    out.classification = classification_loss(bundle, src_fs, source_labels, cls_fs, pseudo_labels, weights.eta);
    out.classifiers = out.classification.classifier_grads;

    std::vector<FeatureGrad> src_grads = out.classification.source_feature_grads;
    const bool adversarial = std::any_of(weights.beta.begin(), weights.beta.end(), [](double b) { return b != 0.0; });
    if (adversarial && !source.empty() && !target_adv.empty()) {
        const auto adv_fs = features_of(target_adv);
        const DiscriminatorLoss adv = discriminator_loss(bundle, src_fs, adv_fs, weights.beta);
        out.adversarial_loss = adv.loss;
        // The extractors maximize L(F,D): subtract its feature gradients.
        const double r = weights.reversal;
        for (std::size_t k = 0; k < src_grads.size(); ++k) {
            for (std::size_t v = 0; v < kNumViews; ++v) {
                auto dst = src_grads[k].f[v].values();
                const auto a = adv.source_feature_grads[k].f[v].values();
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] -= r * a[j];
            }
        }
        for (std::size_t k = 0; k < target_adv.size(); ++k) {
            FeatureGrad neg = adv.target_feature_grads[k];
            for (auto& t : neg.f) for (double& x : t.values()) x *= -r;
            backprop_features(bundle, target_adv[k], neg, out.extractors);
        }
    }
    for (std::size_t k = 0; k < source.size(); ++k) backprop_features(bundle, source[k], src_grads[k], out.extractors);
    for (std::size_t k = 0; k < target_cls.size(); ++k) {
        backprop_features(bundle, target_cls[k], out.classification.target_feature_grads[k], out.extractors);
    }
    return out;
}

std::vector<int> source_labels_of(std::span<const RegionSample> batch) {
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const auto& s : batch) {
        if (!s.label) throw std::invalid_argument("source sample without a label");
        labels.push_back(*s.label);
    }
    return labels;
}

RoundResult adversarial_round(ModelBundle& bundle, std::span<const RegionSample> source_batch,
                              std::span<const RegionSample> target_batch, const BalanceWeights& weights,
                              BundleOptimizer& optim, PseudoState& pseudo_state, const RoundOptions& options) {
    if (source_batch.empty() || target_batch.empty()) throw std::invalid_argument("adversarial_round needs both batches");
    const std::vector<int> labels = source_labels_of(source_batch);
    const std::size_t nt = target_batch.size();

    std::vector<ExtractTrace> src;
    src.reserve(source_batch.size());
    for (const auto& s : source_batch) src.push_back(extract_traced(bundle, s));
    std::vector<ExtractTrace> weak;
    weak.reserve(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        weak.push_back(extract_traced(bundle, augment_weak(target_batch[k], derive_seed(options.augment_seed, k),
                                                           options.weak_sigma)));
    }

    RoundResult result;

    // (a) discriminator step
    {
        const auto src_fs = features_of(src);
        const auto weak_fs = features_of(weak);
        const DiscriminatorLoss d = discriminator_loss(bundle, src_fs, weak_fs, weights.beta);
        result.losses.disc_loss = d.loss;
        result.losses.disc_per_view = d.per_view;
        for (std::size_t v = 0; v < kNumViews; ++v) sgd_step(bundle.discriminators[v], d.disc_grads[v], optim.discriminators[v]);
    }

    // (b) pseudo labels from the weak view; extractors and classifiers are untouched by (a)
    result.pseudo_labels.assign(nt, PseudoLabelSet{});
    if (options.pseudo_labels) {
        for (std::size_t k = 0; k < nt; ++k) {
            result.pseudo_labels[k] = gen_set(pseudo_state, classify_all(bundle, weak[k].features));
        }
    }

    // (c) feature/classifier step on L(F,G) - L(F,D)
    std::vector<ExtractTrace> strong;
    if (options.pseudo_labels) {
        strong.reserve(nt);
        for (std::size_t k = 0; k < nt; ++k) {
            strong.push_back(extract_traced(
                bundle, augment_strong(target_batch[k], derive_seed(options.augment_seed, nt + k), options.strong_sigma,
                                       options.strong_dropout)));
        }
    }
    const std::span<const PseudoLabelSet> pseudo =
        options.pseudo_labels ? std::span<const PseudoLabelSet>(result.pseudo_labels) : std::span<const PseudoLabelSet>();
    const FeatureClassifierGrads g = feature_classifier_gradients(bundle, src, labels, strong, pseudo, weak, weights);
    result.losses.cls_loss_source = g.classification.source_loss;
    result.losses.cls_loss_target = g.classification.target_loss;
    result.losses.cls_source_per_view = g.classification.per_view_source;
    result.losses.cls_target_per_view = g.classification.per_view_target;

    for (std::size_t r = 0; r < kNumRegions; ++r) sgd_step(bundle.extractors[r], g.extractors[r], optim.extractors[r]);
    for (std::size_t v = 0; v < kNumViews; ++v) sgd_step(bundle.classifiers[v], g.classifiers[v], optim.classifiers[v]);
    return result;
}

double supervised_round(ModelBundle& bundle, std::span<const RegionSample> source_batch, const ViewWeights& eta,
                        BundleOptimizer& optim) {
    const std::vector<int> labels = source_labels_of(source_batch);
    std::vector<ExtractTrace> src;
    src.reserve(source_batch.size());
    for (const auto& s : source_batch) src.push_back(extract_traced(bundle, s));
    BalanceWeights w;
    w.beta.fill(0.0);
    w.eta = eta;
    const FeatureClassifierGrads g = feature_classifier_gradients(bundle, src, labels, {}, {}, {}, w);
    for (std::size_t r = 0; r < kNumRegions; ++r) sgd_step(bundle.extractors[r], g.extractors[r], optim.extractors[r]);
    for (std::size_t v = 0; v < kNumViews; ++v) sgd_step(bundle.classifiers[v], g.classifiers[v], optim.classifiers[v]);
    return g.classification.loss;
}

}  // namespace aglrls
