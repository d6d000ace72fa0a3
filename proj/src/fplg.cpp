#include "aglrls/fplg.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "aglrls/autodiff.hpp"
#include "aglrls/errors.hpp"

namespace aglrls {

std::string to_string(ThresholdPolicy p) {
    switch (p) {
        case ThresholdPolicy::sts: return "STS";
        case ThresholdPolicy::dts: return "DTS";
        case ThresholdPolicy::idts: return "IDTS";
    }
    return "?";
}

ThresholdPolicy policy_from_string(const std::string& s) {
    std::string u = s;
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    if (u == "STS") return ThresholdPolicy::sts;
    if (u == "DTS") return ThresholdPolicy::dts;
    if (u == "IDTS") return ThresholdPolicy::idts;
    throw std::invalid_argument("unknown threshold policy '" + s + "' (expected STS, DTS or IDTS)");
}

PseudoState::PseudoState(std::size_t num_classes, ThresholdPolicy policy, double theta)
    : num_classes_(num_classes), policy_(policy), theta_(theta), sigma_(kNumViews * num_classes, 0) {
    if (num_classes == 0) throw std::invalid_argument("pseudo state needs at least one class");
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in (0, 1]");
}

std::span<const std::uint64_t> PseudoState::sigma_row(std::size_t view) const {
    if (view >= kNumViews) throw std::out_of_range("view index out of range");
    return std::span<const std::uint64_t>(sigma_).subspan(view * num_classes_, num_classes_);
}

void PseudoState::record(std::size_t view, std::size_t cls) {
    if (frozen_) return;
    if (view >= kNumViews || cls >= num_classes_) throw std::out_of_range("sigma index out of range");
    ++sigma_[view * num_classes_ + cls];
}

PseudoState PseudoState::restore(std::size_t num_classes, ThresholdPolicy policy, double theta,
                                 std::vector<std::uint64_t> sigma, bool frozen) {
    PseudoState s(num_classes, policy, theta);
    if (sigma.size() != s.sigma_.size()) throw DimensionError("sigma table has the wrong size");
    s.sigma_ = std::move(sigma);
    s.frozen_ = frozen;
    return s;
}

std::vector<double> lambda_of(std::span<const std::uint64_t> sigma_row) {
    std::vector<double> lambda(sigma_row.size(), 1.0);
    if (sigma_row.empty()) return lambda;
    const std::uint64_t top = *std::max_element(sigma_row.begin(), sigma_row.end());
    if (top == 0) return lambda;  // cold start
    for (std::size_t j = 0; j < sigma_row.size(); ++j) {
        lambda[j] = static_cast<double>(sigma_row[j]) / static_cast<double>(top);
    }
    return lambda;
}

double map_m(double lambda, ThresholdPolicy policy) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
    switch (policy) {
        case ThresholdPolicy::sts: return 1.0;
        case ThresholdPolicy::dts: return lambda;
        case ThresholdPolicy::idts: return (lambda + 1.0) * (lambda + 1.0) / 4.0;
    }
    return 1.0;
}

std::vector<double> thresholds_of(const PseudoState& state, std::size_t view) {
    std::vector<double> t = lambda_of(state.sigma_row(view));
    for (double& v : t) v = map_m(v, state.policy()) * state.theta();
    return t;
}

int gen_label(std::span<const double> logits, std::span<const double> thresholds) {
    if (logits.size() != thresholds.size()) throw DimensionError("logits and thresholds differ in length");
    const std::vector<double> s = softmax(logits);
    const std::size_t p = argmax(s);
    return s[p] > thresholds[p] ? static_cast<int>(p) : kNoLabel;
}

PseudoLabelSet gen_set(PseudoState& state, const Tensor& score_rows) {
    if (score_rows.rank() != 2 || score_rows.rows() != kNumViews || score_rows.cols() != state.num_classes()) {
        throw DimensionError("score rows must be 7 x num_classes");
    }
    PseudoLabelSet out;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        out.y_hat[v] = gen_label(score_rows.row(v), thresholds_of(state, v));
        if (out.y_hat[v] != kNoLabel) state.record(v, static_cast<std::size_t>(out.y_hat[v]));
    }
    return out;
}

PseudoState& freeze(PseudoState& state) {
    state.freeze();
    return state;
}

std::string serialize_state(const PseudoState& state) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "# policy=" << to_string(state.policy()) << " theta=" << state.theta()
       << " classes=" << state.num_classes() << " frozen=" << (state.frozen() ? 1 : 0) << '\n';
    os << "view,class,sigma\n";
    for (std::size_t v = 0; v < kNumViews; ++v) {
        for (std::size_t j = 0; j < state.num_classes(); ++j) os << v << ',' << j << ',' << state.sigma(v, j) << '\n';
    }
    return os.str();
}

PseudoState parse_state(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ParseError("missing '# policy=...' header", 1);
    std::optional<ThresholdPolicy> policy;
    double theta = -1.0;
    std::size_t classes = 0;
    bool frozen = false;
    {
        std::istringstream fields(line.substr(2));
        std::string field;
        while (fields >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw ParseError("malformed header field '" + field + "'", line_no);
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            try {
                if (key == "policy") policy = policy_from_string(value);
                else if (key == "theta") theta = std::stod(value);
                else if (key == "classes") classes = std::stoul(value);
                else if (key == "frozen") frozen = value == "1";
                else throw ParseError("unknown header key '" + key + "'", line_no);
            } catch (const std::invalid_argument& e) {
                throw ParseError(e.what(), line_no);
            }
        }
    }
    if (!policy || classes == 0 || theta <= 0.0) throw ParseError("header needs policy, theta and classes", line_no);
    ++line_no;
    if (!std::getline(is, line) || line != "view,class,sigma") throw ParseError("missing 'view,class,sigma' header", line_no);
    std::vector<std::uint64_t> sigma(kNumViews * classes, 0);
    std::vector<bool> seen(sigma.size(), false);
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t v = 0, j = 0;
        std::uint64_t count = 0;
        char c1 = 0, c2 = 0;
        if (!(ls >> v >> c1 >> j >> c2 >> count) || c1 != ',' || c2 != ',' || v >= kNumViews || j >= classes) {
            throw ParseError("malformed row '" + line + "'", line_no);
        }
        sigma[v * classes + j] = count;
        seen[v * classes + j] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw ParseError("state dump is missing (view,class) rows", line_no);
    }
    return PseudoState::restore(classes, *policy, theta, std::move(sigma), frozen);
}

}  // namespace aglrls
