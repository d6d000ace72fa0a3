#pragma once

// Feature-level pseudo labels with per-classifier, per-class dynamic thresholds.
//
//   lambda_j = sigma_j / max(sigma)          (1 for every class while max(sigma) == 0)
//   t_j      = M(lambda_j) * theta
//   M        = (lambda+1)^2/4 (IDTS), lambda (DTS), 1 (STS)
//   y_hat    = argmax(softmax) if its score strictly exceeds its threshold, else -1

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aglrls/model.hpp"
#include "aglrls/tensor.hpp"

namespace aglrls {

enum class ThresholdPolicy { sts, dts, idts };

std::string to_string(ThresholdPolicy p);
/// Accepts "STS", "DTS", "IDTS" (any case).
ThresholdPolicy policy_from_string(const std::string& s);

inline constexpr double kDefaultTheta = 0.95;
inline constexpr int kNoLabel = -1;

struct PseudoLabelSet {
    std::array<int, kNumViews> y_hat{kNoLabel, kNoLabel, kNoLabel, kNoLabel, kNoLabel, kNoLabel, kNoLabel};
    friend bool operator==(const PseudoLabelSet&, const PseudoLabelSet&) = default;
};

class PseudoState {
public:
    PseudoState(std::size_t num_classes, ThresholdPolicy policy, double theta = kDefaultTheta);

    std::size_t num_classes() const noexcept { return num_classes_; }
    ThresholdPolicy policy() const noexcept { return policy_; }
    double theta() const noexcept { return theta_; }
    bool frozen() const noexcept { return frozen_; }

    std::span<const std::uint64_t> sigma_row(std::size_t view) const;
    std::uint64_t sigma(std::size_t view, std::size_t cls) const { return sigma_[view * num_classes_ + cls]; }

    /// No-op once frozen.
    void record(std::size_t view, std::size_t cls);
    void freeze() noexcept { frozen_ = true; }

    /// Rebuilds a state from dumped counters.
    static PseudoState restore(std::size_t num_classes, ThresholdPolicy policy, double theta,
                               std::vector<std::uint64_t> sigma, bool frozen);

    friend bool operator==(const PseudoState&, const PseudoState&) = default;

private:
    std::size_t num_classes_;
    ThresholdPolicy policy_;
    double theta_;
    bool frozen_ = false;
    std::vector<std::uint64_t> sigma_;  // kNumViews x num_classes
};

std::vector<double> lambda_of(std::span<const std::uint64_t> sigma_row);

/// Throws std::invalid_argument for lambda outside [0,1].
double map_m(double lambda, ThresholdPolicy policy);

std::vector<double> thresholds_of(const PseudoState& state, std::size_t view);

/// Softmax, argmax (lowest index on ties), strict comparison with that class's threshold.
int gen_label(std::span<const double> logits, std::span<const double> thresholds);

/// One label per view from 7 x c logits; each success bumps sigma[view][label] unless frozen.
PseudoLabelSet gen_set(PseudoState& state, const Tensor& score_rows);

/// Returns the (now frozen) state for chaining.
PseudoState& freeze(PseudoState& state);

/// CSV dump: comment header with policy and theta, then `view,class,sigma` rows.
std::string serialize_state(const PseudoState& state);
PseudoState parse_state(const std::string& text);

}  // namespace aglrls
