#include "aglrls/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "aglrls/errors.hpp"

namespace aglrls {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream is(v);
    std::string cell;
    while (std::getline(is, cell, ',')) out.push_back(trim(cell));
    return out;
}

double to_double(const std::string& v) {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument("not a real number: '" + v + "'");
    return d;
}

std::uint64_t to_u64(const std::string& v) {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument("not a nonnegative integer: '" + v + "'");
    const unsigned long long u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a nonnegative integer: '" + v + "'");
    return u;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("not a boolean: '" + v + "'");
}

std::vector<double> to_doubles(const std::string& v) {
    std::vector<double> out;
    if (trim(v).empty()) return out;
    for (const auto& cell : split_list(v)) out.push_back(to_double(cell));
    return out;
}

ViewWeights to_weights(const std::string& v) {
    const auto d = to_doubles(v);
    if (d.size() != kNumViews) throw std::invalid_argument("expected 7 comma-separated weights");
    ViewWeights w{};
    for (std::size_t i = 0; i < kNumViews; ++i) {
        if (d[i] < 0.0) throw std::invalid_argument("balance weights must be nonnegative");
        w[i] = d[i];
    }
    return w;
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"num_classes", [](TrainConfig& c, const std::string& v) { c.num_classes = to_u64(v); }},
        {"d_patch", [](TrainConfig& c, const std::string& v) { c.d_patch = to_u64(v); }},
        {"source_count", [](TrainConfig& c, const std::string& v) { c.source_count = to_u64(v); }},
        {"target_count", [](TrainConfig& c, const std::string& v) { c.target_count = to_u64(v); }},
        {"priors", [](TrainConfig& c, const std::string& v) { c.priors = v; }},
        {"source_priors", [](TrainConfig& c, const std::string& v) { c.source_priors = to_doubles(v); }},
        {"target_priors", [](TrainConfig& c, const std::string& v) { c.target_priors = to_doubles(v); }},
        {"mean_scale", [](TrainConfig& c, const std::string& v) { c.mean_scale = to_double(v); }},
        {"global_scale", [](TrainConfig& c, const std::string& v) { c.global_scale = to_double(v); }},
        {"source_noise", [](TrainConfig& c, const std::string& v) { c.source_noise = to_double(v); }},
        {"target_noise", [](TrainConfig& c, const std::string& v) { c.target_noise = to_double(v); }},
        {"target_occlusion", [](TrainConfig& c, const std::string& v) { c.target_occlusion = to_double(v); }},
        {"shift_angle", [](TrainConfig& c, const std::string& v) { c.shift_angle = to_double(v); }},
        {"shift_offset", [](TrainConfig& c, const std::string& v) { c.shift_offset = to_doubles(v); }},
        {"source_data", [](TrainConfig& c, const std::string& v) { c.source_data = v; }},
        {"target_data", [](TrainConfig& c, const std::string& v) { c.target_data = v; }},
        {"d_feature", [](TrainConfig& c, const std::string& v) { c.d_feature = to_u64(v); }},
        {"hidden", [](TrainConfig& c, const std::string& v) { c.hidden = to_u64(v); }},
        {"stage1_epochs", [](TrainConfig& c, const std::string& v) { c.stage1_epochs = to_u64(v); }},
        {"stage2_epochs", [](TrainConfig& c, const std::string& v) { c.stage2_epochs = to_u64(v); }},
        {"batch_size", [](TrainConfig& c, const std::string& v) { c.batch_size = to_u64(v); }},
        {"lr_stage1", [](TrainConfig& c, const std::string& v) { c.lr_stage1 = to_double(v); }},
        {"lr_stage2_fg", [](TrainConfig& c, const std::string& v) { c.lr_stage2_fg = to_double(v); }},
        {"lr_stage2_d", [](TrainConfig& c, const std::string& v) { c.lr_stage2_d = to_double(v); }},
        {"lr_scale", [](TrainConfig& c, const std::string& v) { c.lr_scale = to_double(v); }},
        {"lr_decay_epoch", [](TrainConfig& c, const std::string& v) { c.lr_decay_epoch = to_u64(v); }},
        {"momentum", [](TrainConfig& c, const std::string& v) { c.momentum = to_double(v); }},
        {"weight_decay", [](TrainConfig& c, const std::string& v) { c.weight_decay = to_double(v); }},
        {"theta", [](TrainConfig& c, const std::string& v) { c.theta = to_double(v); }},
        {"policy", [](TrainConfig& c, const std::string& v) { c.policy = policy_from_string(v); }},
        {"beta", [](TrainConfig& c, const std::string& v) { c.beta = to_weights(v); }},
        {"eta", [](TrainConfig& c, const std::string& v) { c.eta = to_weights(v); }},
        {"adversarial", [](TrainConfig& c, const std::string& v) { c.adversarial = to_bool(v); }},
        {"adv_coeff", [](TrainConfig& c, const std::string& v) { c.adv_coeff = to_double(v); }},
        {"adv_ramp", [](TrainConfig& c, const std::string& v) { c.adv_ramp = to_bool(v); }},
        {"pseudo_labels", [](TrainConfig& c, const std::string& v) { c.pseudo_labels = to_bool(v); }},
        {"pseudo_start_epoch", [](TrainConfig& c, const std::string& v) { c.pseudo_start_epoch = to_u64(v); }},
        {"weak_sigma", [](TrainConfig& c, const std::string& v) { c.weak_sigma = to_double(v); }},
        {"strong_sigma", [](TrainConfig& c, const std::string& v) { c.strong_sigma = to_double(v); }},
        {"strong_dropout", [](TrainConfig& c, const std::string& v) { c.strong_dropout = to_double(v); }},
        {"seed", [](TrainConfig& c, const std::string& v) { c.seed = to_u64(v); }},
        {"strategies",
         [](TrainConfig& c, const std::string& v) {
             c.strategies.clear();
             for (const auto& s : split_list(v)) c.strategies.push_back(strategy_from_string(s));
         }},
        {"theta_grid", [](TrainConfig& c, const std::string& v) { c.theta_grid = to_doubles(v); }},
        {"simulate_mode", [](TrainConfig& c, const std::string& v) { c.simulate_mode = v; }},
        {"simulate_epochs", [](TrainConfig& c, const std::string& v) { c.simulate_epochs = to_u64(v); }},
    };
    return table;
}

template <typename Range>
std::string join(const Range& r) {
    std::ostringstream os;
    os << std::setprecision(17);
    bool first = true;
    for (const auto& v : r) {
        if (!first) os << ',';
        os << v;
        first = false;
    }
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    if (num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
    if (d_patch == 0 || d_feature == 0 || hidden == 0) throw std::invalid_argument("dimensions must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (source_count == 0 || target_count == 0) throw std::invalid_argument("sample counts must be positive");
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in (0, 1]");
    for (double t : theta_grid) {
        if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("theta_grid entries must lie in (0, 1]");
    }
    if (lr_stage1 <= 0.0 || lr_stage2_fg <= 0.0 || lr_stage2_d <= 0.0 || lr_scale <= 0.0) {
        throw std::invalid_argument("learning rates must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (adv_coeff < 0.0) throw std::invalid_argument("adv_coeff must be nonnegative");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be nonnegative");
    if (strong_dropout < 0.0 || strong_dropout > 1.0) throw std::invalid_argument("strong_dropout must lie in [0, 1]");
    if (simulate_mode != "replay" && simulate_mode != "full") {
        throw std::invalid_argument("simulate_mode must be 'replay' or 'full'");
    }
    if (priors != "uniform" && priors != "imbalanced") throw std::invalid_argument("priors must be 'uniform' or 'imbalanced'");
    if (priors == "imbalanced" && num_classes < 4) throw std::invalid_argument("imbalanced priors need at least 4 classes");
    if (strategies.empty()) throw std::invalid_argument("at least one strategy is required");
    if (shift_offset.size() > 1 && shift_offset.size() != d_patch) {
        throw std::invalid_argument("shift_offset needs 1 or d_patch values");
    }
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig c;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ParseError("unknown config key '" + key + "'", line_no);
        try {
            it->second(c, value);
        } catch (const std::exception& e) {
            throw ParseError("bad value for '" + key + "': " + e.what(), line_no);
        }
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), 0);
    }
    return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

std::string render_config(const TrainConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "num_classes = " << c.num_classes << '\n'
       << "d_patch = " << c.d_patch << '\n'
       << "source_count = " << c.source_count << '\n'
       << "target_count = " << c.target_count << '\n'
       << "priors = " << c.priors << '\n'
       << "source_priors = " << join(c.source_priors) << '\n'
       << "target_priors = " << join(c.target_priors) << '\n'
       << "mean_scale = " << c.mean_scale << '\n'
       << "global_scale = " << c.global_scale << '\n'
       << "source_noise = " << c.source_noise << '\n'
       << "target_noise = " << c.target_noise << '\n'
       << "target_occlusion = " << c.target_occlusion << '\n'
       << "shift_angle = " << c.shift_angle << '\n'
       << "shift_offset = " << join(c.shift_offset) << '\n'
       << "source_data = " << c.source_data << '\n'
       << "target_data = " << c.target_data << '\n'
       << "d_feature = " << c.d_feature << '\n'
       << "hidden = " << c.hidden << '\n'
       << "stage1_epochs = " << c.stage1_epochs << '\n'
       << "stage2_epochs = " << c.stage2_epochs << '\n'
       << "batch_size = " << c.batch_size << '\n'
       << "lr_stage1 = " << c.lr_stage1 << '\n'
       << "lr_stage2_fg = " << c.lr_stage2_fg << '\n'
       << "lr_stage2_d = " << c.lr_stage2_d << '\n'
       << "lr_scale = " << c.lr_scale << '\n'
       << "lr_decay_epoch = " << c.lr_decay_epoch << '\n'
       << "momentum = " << c.momentum << '\n'
       << "weight_decay = " << c.weight_decay << '\n'
       << "theta = " << c.theta << '\n'
       << "policy = " << to_string(c.policy) << '\n'
       << "beta = " << join(c.beta) << '\n'
       << "eta = " << join(c.eta) << '\n'
       << "adversarial = " << (c.adversarial ? "true" : "false") << '\n'
       << "adv_coeff = " << c.adv_coeff << '\n'
       << "adv_ramp = " << (c.adv_ramp ? "true" : "false") << '\n'
       << "pseudo_labels = " << (c.pseudo_labels ? "true" : "false") << '\n'
       << "pseudo_start_epoch = " << c.pseudo_start_epoch << '\n'
       << "weak_sigma = " << c.weak_sigma << '\n'
       << "strong_sigma = " << c.strong_sigma << '\n'
       << "strong_dropout = " << c.strong_dropout << '\n'
       << "seed = " << c.seed << '\n';
    std::vector<std::string> names;
    for (Strategy s : c.strategies) names.push_back(to_string(s));
    os << "strategies = " << join(names) << '\n'
       << "theta_grid = " << join(c.theta_grid) << '\n'
       << "simulate_mode = " << c.simulate_mode << '\n'
       << "simulate_epochs = " << c.simulate_epochs << '\n';
    return os.str();
}

std::uint64_t config_hash(const TrainConfig& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : render_config(config)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

DatasetSpec dataset_spec(const TrainConfig& c) {
    DatasetSpec s;
    s.num_classes = c.num_classes;
    s.d_patch = c.d_patch;
    const std::vector<double> preset = c.priors == "imbalanced"
                                           ? imbalanced_priors(c.num_classes)
                                           : std::vector<double>(c.num_classes, 1.0 / static_cast<double>(c.num_classes));
    s.source_priors = c.source_priors.empty() ? preset : c.source_priors;
    s.target_priors = c.target_priors.empty() ? preset : c.target_priors;
    randomize_class_means(s, c.mean_scale, derive_seed(c.seed, 11));
    for (std::size_t k = 0; k < c.num_classes; ++k) {
        double* g = s.class_means.data() + k * kNumRegions * c.d_patch;
        for (std::size_t j = 0; j < c.d_patch; ++j) g[j] *= c.global_scale;
    }
    s.shift.angle = c.shift_angle;
    if (c.shift_offset.size() == 1) {
        s.shift.offset.assign(c.d_patch, c.shift_offset[0]);
    } else {
        s.shift.offset = c.shift_offset;
    }
    s.source_noise = c.source_noise;
    s.target_noise = c.target_noise;
    s.target_occlusion = c.target_occlusion;
    s.source_count = c.source_count;
    s.target_count = c.target_count;
    return s;
}

ModelConfig model_config(const TrainConfig& c) {
    ModelConfig m;
    m.d_patch = c.d_patch;
    m.d_feature = c.d_feature;
    m.hidden = c.hidden;
    m.num_classes = c.num_classes;
    return m;
}

BalanceWeights balance_weights(const TrainConfig& c) {
    BalanceWeights w;
    w.beta = c.beta;
    w.eta = c.eta;
    if (!c.adversarial) w.beta.fill(0.0);
    return w;
}

}  // namespace aglrls
