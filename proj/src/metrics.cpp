#include "aglrls/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "aglrls/errors.hpp"

namespace aglrls {

namespace {

// Demsar (2006) Table 5 for k <= 10; k = 11..20 from the studentized range
// distribution with infinite degrees of freedom, divided by sqrt(2).
constexpr std::array<double, 19> kQ05{1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219,
                                      3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544};
constexpr std::array<double, 19> kQ10{1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
                                      3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t EvalReport::total() const { return std::accumulate(confusion.begin(), confusion.end(), std::size_t{0}); }

double f1_score(double recall, double precision) {
    const double denom = recall + precision;
    return denom > 0.0 ? 2.0 * recall * precision / denom : 0.0;
}

EvalReport evaluate(std::span<const int> predictions, std::span<const int> truths, std::size_t num_classes) {
    if (predictions.empty()) throw std::invalid_argument("evaluate: no predictions");
    if (predictions.size() != truths.size()) throw std::invalid_argument("evaluate: predictions and truths differ in length");
    if (num_classes == 0) throw std::invalid_argument("evaluate: zero classes");
    const auto c = static_cast<int>(num_classes);

    EvalReport r;
    r.num_classes = num_classes;
    r.confusion.assign(num_classes * num_classes, 0);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        const int p = predictions[k];
        const int y = truths[k];
        if (p < 0 || p >= c || y < 0 || y >= c) throw std::invalid_argument("evaluate: label out of range");
        ++r.confusion[static_cast<std::size_t>(y) * num_classes + static_cast<std::size_t>(p)];
        if (p == y) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());

    r.recall.assign(num_classes, 0.0);
    r.precision.assign(num_classes, 0.0);
    r.f1.assign(num_classes, 0.0);
    for (std::size_t j = 0; j < num_classes; ++j) {
        std::size_t support = 0, predicted = 0;
        for (std::size_t i = 0; i < num_classes; ++i) {
            support += r.count(j, i);
            predicted += r.count(i, j);
        }
        const auto tp = static_cast<double>(r.count(j, j));
        r.recall[j] = support > 0 ? tp / static_cast<double>(support) : 0.0;
        r.precision[j] = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
        r.f1[j] = f1_score(r.recall[j], r.precision[j]);
    }
    const auto mean = [&](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    r.macro_recall = mean(r.recall);
    r.macro_precision = mean(r.precision);
    r.macro_f1 = mean(r.f1);
    return r;
}

MeanMetrics mean_metrics(std::span<const EvalReport> reports) {
    if (reports.empty()) throw std::invalid_argument("mean_metrics: no reports");
    MeanMetrics m;
    for (const auto& r : reports) {
        m.accuracy += r.accuracy;
        m.recall += r.macro_recall;
        m.precision += r.macro_precision;
        m.f1 += r.macro_f1;
    }
    const auto n = static_cast<double>(reports.size());
    m.accuracy /= n;
    m.recall /= n;
    m.precision /= n;
    m.f1 /= n;
    return m;
}

std::vector<double> friedman_avg_ranks(const RankTable& table) {
    const std::size_t k = table.k();
    const std::size_t n = table.n();
    if (k < 2 || n < 1) throw std::invalid_argument("friedman_avg_ranks needs k >= 2 methods and n >= 1 settings");
    if (table.accuracies.size() != k * n) throw DimensionError("accuracy table is not k x n");

    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> order(k);
    for (std::size_t s = 0; s < n; ++s) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return table.at(a, s) > table.at(b, s); });
        for (std::size_t i = 0; i < k;) {
            std::size_t j = i + 1;
            while (j < k && table.at(order[j], s) == table.at(order[i], s)) ++j;
            // positions i..j-1 hold ranks i+1..j
            const double shared = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
            for (std::size_t t = i; t < j; ++t) sum[order[t]] += shared;
            i = j;
        }
    }
    for (double& v : sum) v /= static_cast<double>(n);
    return sum;
}

double nemenyi_q(std::size_t k, double alpha) {
    if (k < 2 || k > 20) throw std::invalid_argument("nemenyi_q: k must lie in 2..20");
    if (std::abs(alpha - 0.05) < 1e-12) return kQ05[k - 2];
    if (std::abs(alpha - 0.10) < 1e-12) return kQ10[k - 2];
    throw std::invalid_argument("nemenyi_q: alpha must be 0.05 or 0.10");
}

double nemenyi_cd(std::size_t k, std::size_t n, double alpha) {
    if (n == 0) throw std::invalid_argument("nemenyi_cd: n must be positive");
    const double kk = static_cast<double>(k);
    return nemenyi_q(k, alpha) * std::sqrt(kk * (kk + 1.0) / (6.0 * static_cast<double>(n)));
}

RankTable parse_accuracy_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(is, line)) throw ParseError("empty accuracy file", 1);
    ++line_no;
    if (trim(line) != "method,setting,accuracy") throw ParseError("expected header 'method,setting,accuracy'", line_no);

    RankTable t;
    std::map<std::string, std::size_t> method_index, setting_index;
    std::map<std::pair<std::size_t, std::size_t>, double> cells;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(trim(cell));
        if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
        char* end = nullptr;
        const double acc = std::strtod(f[2].c_str(), &end);
        if (f[2].empty() || end != f[2].c_str() + f[2].size() || !std::isfinite(acc)) {
            throw ParseError("invalid accuracy '" + f[2] + "'", line_no);
        }
        auto [mi, mnew] = method_index.try_emplace(f[0], t.methods.size());
        if (mnew) t.methods.push_back(f[0]);
        auto [si, snew] = setting_index.try_emplace(f[1], t.settings.size());
        if (snew) t.settings.push_back(f[1]);
        if (!cells.emplace(std::make_pair(mi->second, si->second), acc).second) {
            throw ParseError("duplicate cell " + f[0] + "/" + f[1], line_no);
        }
    }
    if (cells.size() != t.methods.size() * t.settings.size()) {
        throw ParseError("accuracy table is incomplete: every method needs every setting", 0);
    }
    t.accuracies.resize(cells.size());
    for (const auto& [key, acc] : cells) t.accuracies[key.first * t.settings.size() + key.second] = acc;
    return t;
}

}  // namespace aglrls
