// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "aglrls/cli.hpp"
#include "aglrls/config.hpp"
#include "aglrls/fplg.hpp"
#include "aglrls/glpc.hpp"
#include "aglrls/harness.hpp"
#include "aglrls/metrics.hpp"
#include "unit/reference.hpp"

using namespace aglrls;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path data(const std::string& name) { return fs::path(AGLRLS_TEST_DATA) / name; }

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

double value_after(const std::string& text, const std::string& key) {
    const auto at = text.find(key);
    if (at == std::string::npos) return -1.0;
    return std::stod(text.substr(at + key.size()));
}

Outcome nemenyi() {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli({"stats", "--input", data("published_accuracy.csv").string()}, out, err);
    if (code != kExitOk) return {false, "stats exited " + std::to_string(code) + ": " + err.str()};
    const double cd05 = value_after(out.str(), "CD(alpha=0.05)=");
    const double cd10 = value_after(out.str(), "CD(alpha=0.10)=");
    const bool ok = std::abs(cd05 - 2.77) <= 0.01 && std::abs(cd10 - 2.55) <= 0.01;
    return {ok, "CD 0.05=" + fmt(cd05) + " CD 0.10=" + fmt(cd10)};
}

Outcome mapping() {
    bool ok = map_m(0.0, ThresholdPolicy::idts) == 0.25 && map_m(0.5, ThresholdPolicy::idts) == 0.5625 &&
              map_m(1.0, ThresholdPolicy::idts) == 1.0;
    std::size_t equal = 0;
    for (int i = 0; i < 10000; ++i) {
        const double l = i / 9999.0;
        const double m = map_m(l, ThresholdPolicy::idts);
        if (m < l) ok = false;
        if (m == l) {
            ++equal;
            if (l != 1.0) ok = false;
        }
    }
    return {ok && equal == 1, "grid of 10000, equality points: " + std::to_string(equal)};
}

Outcome thresholds() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::uint64_t> count(0, 1000);
    std::uniform_int_distribution<std::size_t> cls(0, 6);
    const double theta = 0.95;
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<std::uint64_t> row(7);
        for (auto& x : row) x = count(rng);
        if (trial % 10 == 0) std::fill(row.begin(), row.end(), 0);
        std::vector<std::uint64_t> all;
        for (std::size_t v = 0; v < kNumViews; ++v) all.insert(all.end(), row.begin(), row.end());
        const PseudoState s = PseudoState::restore(7, ThresholdPolicy::idts, theta, all, false);
        const auto t = thresholds_of(s, trial % kNumViews);
        for (double x : t) {
            if (x < theta / 4.0 || x > theta) ++violations;
        }
        const auto top = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (t[top] != theta) ++violations;
        const std::size_t j = cls(rng);
        auto bumped = all;
        for (std::size_t v = 0; v < kNumViews; ++v) bumped[v * 7 + j] += 1 + count(rng) % 5;
        const PseudoState b = PseudoState::restore(7, ThresholdPolicy::idts, theta, bumped, false);
        if (thresholds_of(b, 0)[j] < thresholds_of(s, 0)[j]) ++violations;
    }
    return {violations == 0, "10000 rows, violations: " + std::to_string(violations)};
}

Outcome glpc_oracle() {
    std::size_t checked = 0;
    std::size_t mismatches = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const std::size_t c = 2 + seed % 7;
        const auto s = ref::random_scores(c, derive_seed(seed, 1));
        const auto t = ref::random_thresholds(c, derive_seed(seed, 2));
        const Tensor st = ref::to_tensor(s);
        const Tensor tt = ref::to_tensor(t);
        if (static_cast<int>(predict_glpc(st, tt)) != ref::glpc(s, t)) ++mismatches;
        for (Strategy k : all_strategies()) {
            if (static_cast<int>(predict_strategy(k, st, tt)) != ref::strategy(to_string(k), s, t)) ++mismatches;
            ++checked;
        }
    }
    return {mismatches == 0, std::to_string(checked) + " strategy decisions, mismatches: " + std::to_string(mismatches)};
}

Outcome gradients() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        worst = std::max(worst, ref::disc_loss_grad_error(1000 + seed));
        worst = std::max(worst, ref::cls_loss_grad_error(1000 + seed));
    }
    std::ostringstream os;
    os << "50 cases, max relative error " << worst;
    return {worst < 1e-4, os.str()};
}

Outcome fplg_trend() {
    const TrainConfig cfg = load_config(data("imbalance_preset.conf"));
    const auto cells = simulate_fplg(cfg);
    const auto priors = dataset_spec(cfg).target_priors;
    const auto dominant = static_cast<std::size_t>(std::max_element(priors.begin(), priors.end()) - priors.begin());
    bool more_classes = true;
    bool lower_cp = true;
    bool gp_monotone = true;
    std::ostringstream os;
    for (const auto& sts : cells) {
        if (sts.policy != ThresholdPolicy::sts) continue;
        const auto idts = std::find_if(cells.begin(), cells.end(), [&](const SimulationCell& c) {
            return c.policy == ThresholdPolicy::idts && c.theta == sts.theta;
        });
        more_classes = more_classes && idts->view_class_pairs() > sts.view_class_pairs();
        lower_cp = lower_cp && idts->total.cp()[dominant] < sts.total.cp()[dominant];
        os << " theta=" << sts.theta << " pairs " << idts->view_class_pairs() << "/" << sts.view_class_pairs()
           << " CPdom " << fmt(idts->total.cp()[dominant], 3) << "/" << fmt(sts.total.cp()[dominant], 3) << ";";
    }
    for (ThresholdPolicy p : {ThresholdPolicy::sts, ThresholdPolicy::dts, ThresholdPolicy::idts}) {
        std::vector<std::pair<double, double>> curve;
        for (const auto& c : cells) {
            if (c.policy == p) curve.push_back({c.theta, c.total.gp()});
        }
        std::sort(curve.begin(), curve.end(), [](auto a, auto b) { return a.first > b.first; });
        for (std::size_t i = 1; i < curve.size(); ++i) gp_monotone = gp_monotone && curve[i].second >= curve[i - 1].second;
    }
    os << " GP monotone: " << (gp_monotone ? "yes" : "no") << " (IDTS/STS)";
    return {more_classes && lower_cp && gp_monotone, os.str()};
}

Outcome ablation_trend() {
    const TrainConfig base = load_config(data("shift_preset.conf"));
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    int beats = 0;
    std::ostringstream os;
    const int seeds = 5;
    for (int s = 1; s <= seeds; ++s) {
        TrainConfig cfg = base;
        cfg.seed = static_cast<std::uint64_t>(s);
        const AblationResult r = run_ablation(cfg);
        m1 += r.stage1_only / seeds;
        m2 += r.adversarial / seeds;
        m3 += r.fplg / seeds;
        m4 += r.fplg_glpc / seeds;
        if (r.fplg_glpc > r.stage1_only) ++beats;
        os << " seed " << s << ": " << fmt(r.stage1_only, 3) << " " << fmt(r.adversarial, 3) << " " << fmt(r.fplg, 3)
           << " " << fmt(r.fplg_glpc, 3) << ";";
    }
    const bool ok = beats >= 4 && (m4 - m1) >= 0.03 && m1 <= m2 && m2 <= m3 && m3 <= m4;
    os << " means " << fmt(m1) << " <= " << fmt(m2) << " <= " << fmt(m3) << " <= " << fmt(m4) << ", full beats stage1 in "
       << beats << "/5";
    return {ok, os.str()};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    std::vector<std::string> na, nb;
    for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    if (na != nb || na.empty()) {
        why = "file lists differ";
        return false;
    }
    for (const auto& n : na) {
        if (read_text(a / n) != read_text(b / n)) {
            why = n + " differs";
            return false;
        }
    }
    why = std::to_string(na.size()) + " files identical";
    return true;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "aglrls_acceptance_determinism";
    fs::remove_all(root);
    for (const char* run : {"a", "b"}) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = run_cli({"train", "--seed", "7", "--out", (root / run).string()}, out, err);
        if (code != kExitOk) return {false, "train exited " + std::to_string(code) + ": " + err.str()};
    }
    std::string why;
    const bool ok = same_tree(root / "a", root / "b", why);
    fs::remove_all(root);
    return {ok, why};
}

Outcome metrics_fixture() {
    const auto f = ref::confusion_fixture();
    const EvalReport r = evaluate(f.predictions, f.truths, 3);
    const bool ok = std::abs(r.accuracy - 7.0 / 12.0) <= 1e-12 && std::abs(r.macro_recall - 53.0 / 90.0) <= 1e-12 &&
                    std::abs(r.macro_precision - 7.0 / 12.0) <= 1e-12 && std::abs(r.macro_f1 - 73.0 / 126.0) <= 1e-12 &&
                    f1_score(0.5, 0.5) == 0.5 && f1_score(1.0, 1.0) == 1.0;
    return {ok, "acc " + fmt(r.accuracy, 6) + " recall " + fmt(r.macro_recall, 6) + " precision " +
                    fmt(r.macro_precision, 6) + " F1 " + fmt(r.macro_f1, 6)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "Nemenyi critical differences", 1.0, nemenyi},
        {2, "improved mapping identities", 1.0, mapping},
        {3, "threshold contract", 5.0, thresholds},
        {4, "fusion oracle equivalence", 10.0, glpc_oracle},
        {5, "loss gradient soundness", 30.0, gradients},
        {6, "threshold policy trends", 180.0, fplg_trend},
        {7, "module ablation ladder", 600.0, ablation_trend},
        {8, "train determinism", 180.0, determinism},
        {9, "metric fixture", 1.0, metrics_fixture},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && secs <= c.budget_s;
        if (!pass) ++failed;
        std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << " - " << c.name << " (" << fmt(secs, 2)
                  << " s of " << c.budget_s << " s) " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
