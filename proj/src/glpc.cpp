#include "aglrls/glpc.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <stdexcept>

#include "aglrls/autodiff.hpp"
#include "aglrls/errors.hpp"

namespace aglrls {

namespace {

void check_pair(const Tensor& s, const Tensor& t) {
    if (s.rank() != 2 || t.rank() != 2 || s.shape() != t.shape()) {
        throw DimensionError("score and threshold matrices must be the same 2-d shape");
    }
}

// argmax of row `view` if its score clears the threshold.
std::optional<std::size_t> gate(const ScoreMatrix& s, const ThresholdMatrix& t, std::size_t view) {
    const std::size_t p = argmax(s.row(view));
    if (s.at(view, p) > t.at(view, p)) return p;
    return std::nullopt;
}

// Masked aggregation over all rows; an empty mask falls back to the gl head.
std::size_t fused(const ScoreMatrix& s, const ThresholdMatrix& t) {
    const std::vector<double> total = aggregate(s, mask(s, t));
    if (std::all_of(total.begin(), total.end(), [](double v) { return v == 0.0; })) {
        return argmax(s.row(kGlobalLocalView));
    }
    return argmax(total);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::global: return "Global";
        case Strategy::glocal: return "GLocal";
        case Strategy::average: return "Average";
        case Strategy::voting: return "Voting";
        case Strategy::glpc: return "GLPC";
        case Strategy::con_i: return "Con-i";
        case Strategy::con_ii: return "Con-ii";
        case Strategy::con_iii: return "Con-iii";
        case Strategy::con_iv: return "Con-iv";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& name) {
    const std::string n = lower(name);
    for (Strategy s : all_strategies()) {
        if (lower(to_string(s)) == n) return s;
    }
    if (n == "g-local") return Strategy::glocal;
    throw std::invalid_argument("unknown prediction strategy '" + name + "'");
}

const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> all{Strategy::global, Strategy::glocal, Strategy::average,
                                           Strategy::voting, Strategy::glpc,   Strategy::con_i,
                                           Strategy::con_ii, Strategy::con_iii, Strategy::con_iv};
    return all;
}

ScoreMatrix score_matrix(const Tensor& logits) {
    if (logits.rank() != 2) throw DimensionError("logits must be 7 x c");
    ScoreMatrix s = Tensor::matrix(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto p = softmax(logits.row(i));
        std::copy(p.begin(), p.end(), s.row(i).begin());
    }
    return s;
}

ThresholdMatrix threshold_matrix(const PseudoState& state) {
    ThresholdMatrix t = Tensor::matrix(kNumViews, state.num_classes());
    for (std::size_t v = 0; v < kNumViews; ++v) {
        const auto row = thresholds_of(state, v);
        std::copy(row.begin(), row.end(), t.row(v).begin());
    }
    return t;
}

std::pair<ScoreMatrix, ThresholdMatrix> build_matrices(const ModelBundle& bundle, const PseudoState& frozen_state,
                                                       const RegionSample& sample) {
    if (!frozen_state.frozen()) throw ContractError("inference requires a frozen pseudo-label state");
    if (frozen_state.num_classes() != bundle.config.num_classes) {
        throw DimensionError("pseudo state and model disagree on the class count");
    }
    return {score_matrix(classify_all(bundle, extract(bundle, sample))), threshold_matrix(frozen_state)};
}

Tensor mask(const ScoreMatrix& s, const ThresholdMatrix& t) {
    check_pair(s, t);
    Tensor m(s.shape());
    for (std::size_t k = 0; k < s.size(); ++k) m[k] = s[k] > t[k] ? 1.0 : 0.0;
    return m;
}

std::vector<double> aggregate(const ScoreMatrix& s, const Tensor& m) {
    check_pair(s, m);
    std::vector<double> total(s.cols(), 0.0);
    for (std::size_t i = 0; i < s.rows(); ++i) {
        for (std::size_t j = 0; j < s.cols(); ++j) total[j] += s.at(i, j) * m.at(i, j);
    }
    return total;
}

std::size_t predict_glpc(const ScoreMatrix& s, const ThresholdMatrix& t) {
    check_pair(s, t);
    if (s.rows() != kNumViews) throw DimensionError("score matrix must have 7 rows");
    if (auto p = gate(s, t, kGlobalLocalView)) return *p;
    if (auto p = gate(s, t, kGlobalView)) return *p;
    return fused(s, t);
}

std::size_t predict_strategy(Strategy strategy, const ScoreMatrix& s, const ThresholdMatrix& t) {
    check_pair(s, t);
    if (s.rows() != kNumViews) throw DimensionError("score matrix must have 7 rows");
    const std::size_t c = s.cols();
    switch (strategy) {
        case Strategy::global: return argmax(s.row(kGlobalView));
        case Strategy::glocal: return argmax(s.row(kGlobalLocalView));
        case Strategy::average: {
            std::vector<double> mean(c, 0.0);
            for (std::size_t i = 0; i < kNumViews; ++i) {
                for (std::size_t j = 0; j < c; ++j) mean[j] += s.at(i, j);
            }
            for (double& v : mean) v /= static_cast<double>(kNumViews);
            return argmax(mean);
        }
        case Strategy::voting: {
            std::vector<double> votes(c, 0.0);
            for (std::size_t i = 0; i < kNumViews; ++i) votes[argmax(s.row(i))] += 1.0;
            return argmax(votes);
        }
        case Strategy::glpc: return predict_glpc(s, t);
        case Strategy::con_i: return fused(s, t);
        case Strategy::con_ii: {
            if (auto p = gate(s, t, kGlobalView)) return *p;
            return fused(s, t);
        }
        case Strategy::con_iii: {
            if (auto p = gate(s, t, kGlobalLocalView)) return *p;
            return fused(s, t);
        }
        case Strategy::con_iv: {
            if (auto p = gate(s, t, kGlobalView)) return *p;
            if (auto p = gate(s, t, kGlobalLocalView)) return *p;
            return fused(s, t);
        }
    }
    throw std::invalid_argument("unknown prediction strategy");
}

}  // namespace aglrls
