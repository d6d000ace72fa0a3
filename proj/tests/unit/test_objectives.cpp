#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "aglrls/errors.hpp"
#include "aglrls/objectives.hpp"
#include "reference.hpp"

using namespace aglrls;

namespace {

void zero_weights(Mlp& net) {
    for (auto& l : net.layers()) {
        std::fill(l.weight.begin(), l.weight.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

std::vector<FeatureSet> feats(const ModelBundle& b, const std::vector<RegionSample>& xs) {
    std::vector<FeatureSet> out;
    for (const auto& x : xs) out.push_back(extract(b, x));
    return out;
}

std::vector<ExtractTrace> traces(const ModelBundle& b, const std::vector<RegionSample>& xs) {
    std::vector<ExtractTrace> out;
    for (const auto& x : xs) out.push_back(extract_traced(b, x));
    return out;
}

ModelBundle seven_class_bundle(std::uint64_t seed) {
    ModelConfig c;
    c.d_patch = 3;
    c.d_feature = 2;
    c.hidden = 4;
    c.num_classes = 7;
    return ModelBundle::create(c, seed);
}

bool same_nets(const auto& a, const auto& b) {
    return std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

TEST(DiscriminatorLoss, HalfProbabilitiesGiveWeightSumTimesTwoLn2) {
    ModelBundle b = ref::small_bundle(1);
    for (auto& d : b.discriminators) zero_weights(d);
    const auto src = ref::random_samples(b, 4, true, 2);
    const auto tgt = ref::random_samples(b, 3, false, 3);
    const DiscriminatorLoss d = discriminator_loss(b, feats(b, src), feats(b, tgt), kDefaultBalance);
    EXPECT_NEAR(d.loss, 19.0 * 2.0 * std::log(2.0), 1e-12);
    EXPECT_NEAR(d.loss, 26.34, 0.005);
    for (double v : d.per_view) EXPECT_NEAR(v, 2.0 * std::log(2.0), 1e-12);
}

TEST(DiscriminatorLoss, PerfectDiscriminationIsNearZero) {
    ModelBundle b = ref::small_bundle(1);
    for (auto& e : b.extractors) zero_weights(e);
    for (auto& d : b.discriminators) {
        zero_weights(d);
        auto& l0 = d.layers()[0];
        std::fill(l0.weight.begin(), l0.weight.begin() + static_cast<long>(l0.in), 1.0);
        d.layers()[1].weight[0] = 100.0;
        d.layers()[1].bias[0] = -30.0;
    }
    // Source features +1, target features -1 (extractor biases).
    auto set_bias = [&](ModelBundle& m, double v) {
        for (auto& e : m.extractors) std::fill(e.layers().back().bias.begin(), e.layers().back().bias.end(), v);
    };
    ModelBundle bs = b;
    set_bias(bs, 1.0);
    ModelBundle bt = b;
    set_bias(bt, -1.0);
    const auto xs = ref::random_samples(b, 2, true, 1);
    const DiscriminatorLoss d = discriminator_loss(b, feats(bs, xs), feats(bt, xs), kDefaultBalance);
    EXPECT_LT(d.loss, 1e-9);
    EXPECT_GE(d.loss, 0.0);
}

TEST(DiscriminatorLoss, EmptyBatchThrows) {
    const ModelBundle b = ref::small_bundle(1);
    const auto xs = feats(b, ref::random_samples(b, 2, true, 1));
    EXPECT_THROW(discriminator_loss(b, {}, xs, kDefaultBalance), std::invalid_argument);
    EXPECT_THROW(discriminator_loss(b, xs, {}, kDefaultBalance), std::invalid_argument);
}

TEST(DiscriminatorLoss, MatchesBatchMeanFormula) {
    const ModelBundle b = ref::small_bundle(4);
    const auto fs = feats(b, ref::random_samples(b, 3, true, 5));
    const auto ft = feats(b, ref::random_samples(b, 2, false, 6));
    const ViewWeights beta{1, 2, 3, 4, 5, 6, 7};
    double expected = 0.0;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        double s = 0.0;
        for (const auto& f : fs) s -= std::log(discriminate_all(b, f)[v]);
        double t = 0.0;
        for (const auto& f : ft) t -= std::log(1.0 - discriminate_all(b, f)[v]);
        expected += beta[v] * (s / 3.0 + t / 2.0);
    }
    EXPECT_NEAR(discriminator_loss(b, fs, ft, beta).loss, expected, 1e-10);
}

TEST(DiscriminatorLoss, GradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_LT(ref::disc_loss_grad_error(seed), 1e-4) << seed;
}

TEST(ClassificationLoss, UniformOutputsSingleSource) {
    ModelBundle b = seven_class_bundle(1);
    for (auto& g : b.classifiers) zero_weights(g);
    auto src = ref::random_samples(b, 1, true, 2);
    const ClassificationLoss l = classification_loss(b, feats(b, src), std::vector<int>{3}, {}, {}, kDefaultBalance);
    EXPECT_NEAR(l.loss, 19.0 * std::log(7.0), 1e-12);
    EXPECT_NEAR(l.loss, 36.97, 0.005);
    EXPECT_EQ(l.target_loss, 0.0);
}

TEST(ClassificationLoss, AllFailedPseudoLabelsReduceToSourceTerm) {
    const ModelBundle b = ref::small_bundle(3);
    const auto src = ref::random_samples(b, 4, true, 4);
    const auto tgt = ref::random_samples(b, 5, false, 5);
    std::vector<int> labels;
    for (const auto& s : src) labels.push_back(*s.label);
    const std::vector<PseudoLabelSet> none(tgt.size());
    const auto with = classification_loss(b, feats(b, src), labels, feats(b, tgt), none, kDefaultBalance);
    const auto without = classification_loss(b, feats(b, src), labels, {}, {}, kDefaultBalance);
    EXPECT_EQ(with.loss, without.loss);
    EXPECT_EQ(with.target_loss, 0.0);
    for (std::size_t v = 0; v < kNumViews; ++v) {
        EXPECT_EQ(with.target_counts[v], 0u);
        EXPECT_EQ(ref::flatten(with.classifier_grads[v]), ref::flatten(without.classifier_grads[v]));
    }
}

TEST(ClassificationLoss, TwoSampleHandTable) {
    // One source sample (label 2) and two target samples with per-view pseudo labels.
    const ModelBundle b = ref::small_bundle(8);
    const auto src = ref::random_samples(b, 1, true, 9);
    const auto tgt = ref::random_samples(b, 2, false, 10);
    PseudoLabelSet p0;
    PseudoLabelSet p1;
    p0.y_hat = {0, -1, 1, -1, 3, -1, 2};
    p1.y_hat = {1, -1, -1, 2, 3, 0, -1};
    const std::vector<PseudoLabelSet> pl{p0, p1};
    const ViewWeights eta{7, 1, 1, 1, 1, 1, 7};

    const Tensor ls = classify_all(b, extract(b, src[0]));
    const Tensor l0 = classify_all(b, extract(b, tgt[0]));
    const Tensor l1 = classify_all(b, extract(b, tgt[1]));
    auto ce = [](const Tensor& logits, std::size_t v, int y) {
        const auto s = softmax(logits.row(v));
        return -std::log(s[static_cast<std::size_t>(y)]);
    };
    // view: source CE, target CEs averaged over the labelled entries of that view
    const double table[7][2] = {
        {ce(ls, 0, 2), (ce(l0, 0, 0) + ce(l1, 0, 1)) / 2.0},
        {ce(ls, 1, 2), 0.0},
        {ce(ls, 2, 2), ce(l0, 2, 1)},
        {ce(ls, 3, 2), ce(l1, 3, 2)},
        {ce(ls, 4, 2), (ce(l0, 4, 3) + ce(l1, 4, 3)) / 2.0},
        {ce(ls, 5, 2), ce(l1, 5, 0)},
        {ce(ls, 6, 2), ce(l0, 6, 2)},
    };
    double src_sum = 0.0;
    double tgt_sum = 0.0;
    for (std::size_t v = 0; v < 7; ++v) {
        src_sum += eta[v] * table[v][0];
        tgt_sum += eta[v] * table[v][1];
    }
    const auto l = classification_loss(b, feats(b, src), std::vector<int>{2}, feats(b, tgt), pl, eta);
    EXPECT_NEAR(l.source_loss, src_sum, 1e-12);
    EXPECT_NEAR(l.target_loss, tgt_sum, 1e-12);
    EXPECT_NEAR(l.loss, src_sum + tgt_sum, 1e-12);
    const std::array<std::size_t, 7> counts{2, 0, 1, 1, 2, 1, 1};
    EXPECT_EQ(l.target_counts, counts);
    for (std::size_t v = 0; v < 7; ++v) {
        EXPECT_NEAR(l.per_view_source[v], table[v][0], 1e-12);
        EXPECT_NEAR(l.per_view_target[v], table[v][1], 1e-12);
    }
}

TEST(ClassificationLoss, RejectsBadLabels) {
    const ModelBundle b = ref::small_bundle(3);
    const auto fs = feats(b, ref::random_samples(b, 1, true, 4));
    EXPECT_THROW(classification_loss(b, fs, std::vector<int>{4}, {}, {}, kDefaultBalance), std::invalid_argument);
    EXPECT_THROW(classification_loss(b, fs, std::vector<int>{}, {}, {}, kDefaultBalance), DimensionError);
}

TEST(ClassificationLoss, GradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_LT(ref::cls_loss_grad_error(seed), 1e-4) << seed;
}

TEST(FeatureGradients, ZeroBetaIsPureClassification) {
    const ModelBundle b = ref::small_bundle(12);
    const auto src = ref::random_samples(b, 3, true, 13);
    const auto tgt = ref::random_samples(b, 3, false, 14);
    const auto pl = ref::random_pseudo(3, 4, 15);
    std::vector<int> labels;
    for (const auto& s : src) labels.push_back(*s.label);
    BalanceWeights w;
    w.beta.fill(0.0);
    const auto g = feature_classifier_gradients(b, traces(b, src), labels, traces(b, tgt), pl, traces(b, tgt), w);
    EXPECT_EQ(g.adversarial_loss, 0.0);
    // Reference: classification feature gradients pushed through the extractors by hand.
    const auto cls = classification_loss(b, feats(b, src), labels, feats(b, tgt), pl, w.eta);
    auto ext = zero_extractor_grads(b);
    const auto st = traces(b, src);
    const auto tt = traces(b, tgt);
    for (std::size_t k = 0; k < 3; ++k) backprop_features(b, st[k], cls.source_feature_grads[k], ext);
    for (std::size_t k = 0; k < 3; ++k) backprop_features(b, tt[k], cls.target_feature_grads[k], ext);
    for (std::size_t r = 0; r < kNumRegions; ++r) {
        const auto a = ref::flatten(g.extractors[r]);
        const auto e = ref::flatten(ext[r]);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], e[i], 1e-14);
    }
}

TEST(FeatureGradients, AdversarialComponentDoesNotDecreaseDiscriminatorLoss) {
    // With eta = 0 the F gradient is -dL(F,D)/dF alone; a small descent step along it must not lower L(F,D).
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ModelBundle b = ref::small_bundle(seed);
        const auto src = ref::random_samples(b, 4, true, seed + 1);
        const auto tgt = ref::random_samples(b, 4, false, seed + 2);
        std::vector<int> labels;
        for (const auto& s : src) labels.push_back(*s.label);
        BalanceWeights w;
        w.eta.fill(0.0);
        const auto g = feature_classifier_gradients(b, traces(b, src), labels, {}, {}, traces(b, tgt), w);
        const double before = discriminator_loss(b, feats(b, src), feats(b, tgt), w.beta).loss;
        double directional = 0.0;
        for (std::size_t r = 0; r < kNumRegions; ++r) {
            const auto p = ref::params_of(b.extractors[r]);
            const auto a = ref::flatten(g.extractors[r]);
            for (std::size_t i = 0; i < p.size(); ++i) {
                *p[i] -= 1e-6 * a[i];
                directional += a[i] * a[i];
            }
        }
        const double after = discriminator_loss(b, feats(b, src), feats(b, tgt), w.beta).loss;
        EXPECT_GE(after - before, 0.0) << seed;
        EXPECT_NEAR(after - before, 1e-6 * directional, 1e-3 * 1e-6 * directional + 1e-13) << seed;
    }
}

TEST(AdversarialRound, MatchesScriptedReplay) {
    ModelBundle b = ref::small_bundle(21);
    const auto src = ref::random_samples(b, 4, true, 22);
    const auto tgt = ref::random_samples(b, 5, false, 23);
    BalanceWeights w;
    w.reversal = 0.7;
    RoundOptions opt;
    opt.augment_seed = 99;
    BundleOptimizer optim = BundleOptimizer::create(b, 0.05, 0.1, 0.9, 5e-4);
    PseudoState state(4, ThresholdPolicy::idts, 0.3);

    ModelBundle rb = b;
    BundleOptimizer ro = optim;
    PseudoState rs = state;
    const RoundResult got = adversarial_round(b, src, tgt, w, optim, state, opt);

    // Scripted: D step on weak target, pseudo labels, strong copies, F,G step.
    std::vector<RegionSample> weak;
    std::vector<RegionSample> strong;
    for (std::size_t k = 0; k < tgt.size(); ++k) {
        weak.push_back(augment_weak(tgt[k], derive_seed(99, k)));
        strong.push_back(augment_strong(tgt[k], derive_seed(99, tgt.size() + k)));
    }
    const auto st = traces(rb, src);
    const auto wt = traces(rb, weak);
    const DiscriminatorLoss d = discriminator_loss(rb, feats(rb, src), feats(rb, weak), w.beta);
    for (std::size_t v = 0; v < kNumViews; ++v) sgd_step(rb.discriminators[v], d.disc_grads[v], ro.discriminators[v]);
    std::vector<PseudoLabelSet> pl;
    for (const auto& t : wt) pl.push_back(gen_set(rs, classify_all(rb, t.features)));
    std::vector<int> labels;
    for (const auto& s : src) labels.push_back(*s.label);
    const auto g = feature_classifier_gradients(rb, st, labels, traces(rb, strong), pl, wt, w);
    for (std::size_t r = 0; r < kNumRegions; ++r) sgd_step(rb.extractors[r], g.extractors[r], ro.extractors[r]);
    for (std::size_t v = 0; v < kNumViews; ++v) sgd_step(rb.classifiers[v], g.classifiers[v], ro.classifiers[v]);

    EXPECT_EQ(got.losses.disc_loss, d.loss);
    EXPECT_EQ(got.losses.cls_loss_source, g.classification.source_loss);
    EXPECT_EQ(got.losses.cls_loss_target, g.classification.target_loss);
    EXPECT_EQ(got.pseudo_labels, pl);
    EXPECT_EQ(state, rs);
    EXPECT_EQ(b, rb);
}

TEST(AdversarialRound, DiscriminatorStepLeavesFeatureAndClassifierNetsAlone) {
    ModelBundle b = ref::small_bundle(31);
    const ModelBundle before = b;
    const auto src = ref::random_samples(b, 3, true, 32);
    const auto tgt = ref::random_samples(b, 3, false, 33);
    BundleOptimizer optim = BundleOptimizer::create(b, 0.0, 0.1, 0.9, 5e-4);
    PseudoState state(4, ThresholdPolicy::idts, 0.3);
    adversarial_round(b, src, tgt, BalanceWeights{}, optim, state, RoundOptions{});
    EXPECT_TRUE(same_nets(b.extractors, before.extractors));
    EXPECT_TRUE(same_nets(b.classifiers, before.classifiers));
    EXPECT_FALSE(same_nets(b.discriminators, before.discriminators));
}

TEST(AdversarialRound, FeatureStepLeavesDiscriminatorsAlone) {
    ModelBundle b = ref::small_bundle(41);
    const ModelBundle before = b;
    const auto src = ref::random_samples(b, 3, true, 42);
    const auto tgt = ref::random_samples(b, 3, false, 43);
    BundleOptimizer optim = BundleOptimizer::create(b, 0.1, 0.0, 0.9, 5e-4);
    PseudoState state(4, ThresholdPolicy::idts, 0.3);
    adversarial_round(b, src, tgt, BalanceWeights{}, optim, state, RoundOptions{});
    EXPECT_TRUE(same_nets(b.discriminators, before.discriminators));
    EXPECT_FALSE(same_nets(b.extractors, before.extractors));
    EXPECT_FALSE(same_nets(b.classifiers, before.classifiers));
}

TEST(AdversarialRound, ZeroBetaGivesNoAdversarialGradient) {
    ModelBundle a = ref::small_bundle(51);
    ModelBundle c = a;
    const auto src = ref::random_samples(a, 3, true, 52);
    const auto tgt = ref::random_samples(a, 3, false, 53);
    BalanceWeights w;
    w.beta.fill(0.0);
    RoundOptions opt;
    opt.pseudo_labels = false;
    BundleOptimizer oa = BundleOptimizer::create(a, 0.1, 0.1, 0.9, 5e-4);
    BundleOptimizer oc = oa;
    PseudoState sa(4, ThresholdPolicy::idts);
    const RoundResult r = adversarial_round(a, src, tgt, w, oa, sa, opt);
    EXPECT_TRUE(std::isfinite(r.losses.disc_loss));
    EXPECT_EQ(r.losses.cls_loss_target, 0.0);
    // Continued source training: same as a supervised round.
    supervised_round(c, src, w.eta, oc);
    EXPECT_TRUE(same_nets(a.extractors, c.extractors));
    EXPECT_TRUE(same_nets(a.classifiers, c.classifiers));
}

TEST(AdversarialRound, ZeroEtaMovesOnlyExtractorsThroughAdversary) {
    ModelBundle b = ref::small_bundle(61);
    const ModelBundle before = b;
    const auto src = ref::random_samples(b, 3, true, 62);
    const auto tgt = ref::random_samples(b, 3, false, 63);
    BalanceWeights w;
    w.eta.fill(0.0);
    RoundOptions opt;
    opt.pseudo_labels = false;
    BundleOptimizer optim = BundleOptimizer::create(b, 0.1, 0.1, 0.9, 0.0);
    PseudoState state(4, ThresholdPolicy::idts);
    const RoundResult r = adversarial_round(b, src, tgt, w, optim, state, opt);
    EXPECT_EQ(r.losses.cls_loss_source, 0.0);
    EXPECT_TRUE(same_nets(b.classifiers, before.classifiers));
    EXPECT_FALSE(same_nets(b.extractors, before.extractors));
    for (const auto& p : r.pseudo_labels) EXPECT_EQ(p, PseudoLabelSet{});
    for (std::size_t v = 0; v < kNumViews; ++v) {
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(state.sigma(v, j), 0u);
    }
}

TEST(AdversarialRound, DeterministicForFixedSeed) {
    const ModelBundle b0 = ref::small_bundle(71);
    const auto src = ref::random_samples(b0, 3, true, 72);
    const auto tgt = ref::random_samples(b0, 3, false, 73);
    auto run = [&] {
        ModelBundle b = b0;
        BundleOptimizer o = BundleOptimizer::create(b, 0.05, 0.05, 0.9, 5e-4);
        PseudoState s(4, ThresholdPolicy::idts, 0.3);
        RoundOptions opt;
        opt.augment_seed = 5;
        const RoundResult r = adversarial_round(b, src, tgt, BalanceWeights{}, o, s, opt);
        return std::make_tuple(b, r.losses.disc_loss, r.losses.cls_loss_source, r.losses.cls_loss_target, s);
    };
    EXPECT_EQ(run(), run());
}

TEST(AdversarialRound, RejectsUnlabeledSourceAndEmptyBatches) {
    ModelBundle b = ref::small_bundle(81);
    const auto tgt = ref::random_samples(b, 2, false, 82);
    BundleOptimizer o = BundleOptimizer::create(b, 0.05, 0.05, 0.9, 5e-4);
    PseudoState s(4, ThresholdPolicy::idts);
    EXPECT_THROW(adversarial_round(b, tgt, tgt, BalanceWeights{}, o, s, RoundOptions{}), std::invalid_argument);
    EXPECT_THROW(adversarial_round(b, {}, tgt, BalanceWeights{}, o, s, RoundOptions{}), std::invalid_argument);
}
