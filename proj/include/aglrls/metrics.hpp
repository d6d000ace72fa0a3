#pragma once

// Imbalance-aware classification metrics, Friedman average ranks and the Nemenyi critical difference.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace aglrls {

struct EvalReport {
    std::size_t num_classes = 0;
    std::vector<std::size_t> confusion;  // row = truth, column = prediction
    double accuracy = 0.0;
    double macro_recall = 0.0;
    double macro_precision = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> recall;
    std::vector<double> precision;
    std::vector<double> f1;

    std::size_t count(std::size_t truth, std::size_t predicted) const { return confusion[truth * num_classes + predicted]; }
    std::size_t total() const;
};

/// Harmonic mean of recall and precision; 0 when both are 0.
double f1_score(double recall, double precision);

/// Zero-support recall and zero-prediction precision count as 0 in the macro averages.
/// Throws std::invalid_argument for empty or mismatched inputs and out-of-range labels.
EvalReport evaluate(std::span<const int> predictions, std::span<const int> truths, std::size_t num_classes);

struct MeanMetrics {
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

MeanMetrics mean_metrics(std::span<const EvalReport> reports);

/// k methods x n settings of accuracies.
struct RankTable {
    std::vector<std::string> methods;
    std::vector<std::string> settings;
    std::vector<double> accuracies;  // methods.size() x settings.size(), row-major

    std::size_t k() const { return methods.size(); }
    std::size_t n() const { return settings.size(); }
    double at(std::size_t method, std::size_t setting) const { return accuracies[method * n() + setting]; }
};

/// Rank 1 = highest accuracy within a setting; ties share the mean of their ranks.
std::vector<double> friedman_avg_ranks(const RankTable& table);

/// Two-tailed Nemenyi q_alpha (studentized range / sqrt 2) for k in 2..20, alpha in {0.05, 0.10}.
double nemenyi_q(std::size_t k, double alpha);

/// CD = q_alpha * sqrt(k(k+1) / (6n)).
double nemenyi_cd(std::size_t k, std::size_t n, double alpha);

/// Parses `method,setting,accuracy` CSV (with header). Every (method, setting) cell must appear exactly once.
RankTable parse_accuracy_csv(const std::string& text);

}  // namespace aglrls
