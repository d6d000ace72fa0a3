#include "aglrls/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "aglrls/errors.hpp"
#include "aglrls/evaluation_access.hpp"
#include "aglrls/objectives.hpp"

namespace aglrls {

namespace {

constexpr std::uint64_t kDataStream = 12;
constexpr std::uint64_t kBundleStream = 21;
constexpr std::uint64_t kStage1Shuffle = 31;
constexpr std::uint64_t kStage2Shuffle = 41;
constexpr std::uint64_t kAugmentStream = 51;

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::size_t num_batches(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

PseudoStats count_labels(const std::vector<PseudoLabelSet>& labels, std::span<const int> truth,
                         std::span<const std::size_t> rows, std::size_t num_classes) {
    PseudoStats st;
    st.per_class.assign(num_classes, 0);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        for (int y : labels[k].y_hat) {
            ++st.decisions;
            if (y == kNoLabel) continue;
            ++st.generated;
            ++st.per_class[static_cast<std::size_t>(y)];
            if (y == truth[rows[k]]) ++st.correct;
        }
    }
    return st;
}

void check_bundle(const TrainConfig& config, const ModelBundle& bundle) {
    if (bundle.config != model_config(config)) throw std::invalid_argument("model bundle does not match config");
}

void check_data(const TrainConfig& config, const Dataset& d) {
    if (d.num_classes() != config.num_classes || d.d_patch() != config.d_patch) {
        throw std::invalid_argument("dataset dimensions do not match config");
    }
    if (d.size() == 0) throw std::invalid_argument("dataset is empty");
}

}  // namespace

double PseudoStats::gp() const { return decisions == 0 ? 0.0 : static_cast<double>(generated) / decisions; }

double PseudoStats::rp() const { return generated == 0 ? 0.0 : static_cast<double>(correct) / generated; }

std::vector<double> PseudoStats::cp() const {
    std::vector<double> out(per_class.size(), 0.0);
    if (generated == 0) return out;
    for (std::size_t j = 0; j < per_class.size(); ++j) out[j] = static_cast<double>(per_class[j]) / generated;
    return out;
}

std::size_t PseudoStats::classes_covered() const {
    return static_cast<std::size_t>(std::count_if(per_class.begin(), per_class.end(), [](std::size_t n) { return n > 0; }));
}

void PseudoStats::add(const PseudoStats& other) {
    decisions += other.decisions;
    generated += other.generated;
    correct += other.correct;
    if (per_class.size() < other.per_class.size()) per_class.resize(other.per_class.size(), 0);
    for (std::size_t j = 0; j < other.per_class.size(); ++j) per_class[j] += other.per_class[j];
}

std::size_t SimulationCell::view_class_pairs() const {
    return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [](std::uint64_t n) { return n > 0; }));
}

namespace {

std::vector<std::uint64_t> sigma_table(const PseudoState& state) {
    std::vector<std::uint64_t> out;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        const auto row = state.sigma_row(v);
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

}  // namespace

DataPair make_data(const TrainConfig& config) {
    config.validate();
    if (!config.source_data.empty() || !config.target_data.empty()) {
        if (config.source_data.empty() || config.target_data.empty()) {
            throw std::invalid_argument("source_data and target_data must be set together");
        }
        DataPair d{load(config.source_data), load(config.target_data)};
        if (d.source.domain() != Domain::source || d.target.domain() != Domain::target) {
            throw std::invalid_argument("source_data/target_data hold the wrong domains");
        }
        check_data(config, d.source);
        check_data(config, d.target);
        return d;
    }
    auto [s, t] = generate(dataset_spec(config), derive_seed(config.seed, kDataStream));
    return DataPair{std::move(s), std::move(t)};
}

Stage1Result run_stage1(const TrainConfig& config) { return run_stage1(config, make_data(config).source); }

Stage1Result run_stage1(const TrainConfig& config, const Dataset& source) {
    config.validate();
    check_data(config, source);
    Stage1Result out{ModelBundle::create(model_config(config), derive_seed(config.seed, kBundleStream)), {}};
    out.record.seed = config.seed;
    out.record.config_hash = config_hash(config);

    const double lr = config.lr_stage1 * config.lr_scale;
    BundleOptimizer optim = BundleOptimizer::create(out.bundle, lr, lr, config.momentum, config.weight_decay);
    const std::size_t n = source.size();
    std::vector<RegionSample> batch;
    for (std::size_t e = 0; e < config.stage1_epochs; ++e) {
        const auto order = shuffled(n, derive_seed(derive_seed(config.seed, kStage1Shuffle), e));
        double total = 0.0;
        const std::size_t nb = num_batches(n, config.batch_size);
        for (std::size_t b = 0; b < nb; ++b) {
            batch.clear();
            for (std::size_t i = b * config.batch_size; i < std::min(n, (b + 1) * config.batch_size); ++i) {
                batch.push_back(source[order[i]]);
            }
            total += supervised_round(out.bundle, batch, config.eta, optim);
        }
        if (!std::isfinite(total)) throw std::runtime_error("stage 1 diverged at epoch " + std::to_string(e));
        out.record.losses.push_back({"stage1", e, 0.0, total / nb, 0.0});
    }
    return out;
}

Stage2Result run_stage2(const TrainConfig& config, const ModelBundle& bundle) {
    return run_stage2(config, bundle, make_data(config));
}

Stage2Result run_stage2(const TrainConfig& config, const ModelBundle& bundle, const DataPair& data,
                        const EpochHook& hook) {
    config.validate();
    check_bundle(config, bundle);
    check_data(config, data.source);
    check_data(config, data.target);
    Stage2Result out{bundle, PseudoState(config.num_classes, config.policy, config.theta), {}};
    out.record.seed = config.seed;
    out.record.config_hash = config_hash(config);

    const BalanceWeights weights = balance_weights(config);
    const double lr_fg = config.lr_stage2_fg * config.lr_scale;
    const double lr_d = config.lr_stage2_d * config.lr_scale;
    BundleOptimizer optim = BundleOptimizer::create(out.bundle, lr_fg, lr_d, config.momentum, config.weight_decay);
    const std::span<const int> truth = EvaluationAccess::truth(data.target);

    const std::size_t ns = data.source.size();
    const std::size_t nt = data.target.size();
    const std::size_t nb = num_batches(nt, config.batch_size);
    std::vector<RegionSample> sbatch;
    std::vector<RegionSample> tbatch;
    std::vector<std::size_t> trows;
    for (std::size_t e = 0; e < config.stage2_epochs; ++e) {
        if (e == config.lr_decay_epoch) optim.set_learning_rates(lr_fg / 10.0, lr_d / 10.0);
        const std::uint64_t epoch_seed = derive_seed(derive_seed(config.seed, kStage2Shuffle), e);
        const auto sorder = shuffled(ns, derive_seed(epoch_seed, 0));
        const auto torder = shuffled(nt, derive_seed(epoch_seed, 1));
        EpochLosses losses{"stage2", e, 0.0, 0.0, 0.0};
        PseudoStats stats;
        stats.epoch = e;
        stats.policy = config.policy;
        stats.theta = config.theta;
        stats.per_class.assign(config.num_classes, 0);
        for (std::size_t b = 0; b < nb; ++b) {
            sbatch.clear();
            tbatch.clear();
            trows.clear();
            for (std::size_t i = b * config.batch_size; i < std::min(nt, (b + 1) * config.batch_size); ++i) {
                tbatch.push_back(data.target[torder[i]]);
                trows.push_back(torder[i]);
                sbatch.push_back(data.source[sorder[i % ns]]);
            }
            RoundOptions opts;
            opts.augment_seed = derive_seed(derive_seed(config.seed, kAugmentStream), e * nb + b);
            opts.weak_sigma = config.weak_sigma;
            opts.strong_sigma = config.strong_sigma;
            opts.strong_dropout = config.strong_dropout;
            opts.pseudo_labels = config.pseudo_labels && e >= config.pseudo_start_epoch;
            BalanceWeights w = weights;
            const double progress = static_cast<double>(e * nb + b) / static_cast<double>(config.stage2_epochs * nb);
            w.reversal = config.adv_coeff * (config.adv_ramp ? 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0 : 1.0);
            const RoundResult r = adversarial_round(out.bundle, sbatch, tbatch, w, optim, out.state, opts);
            losses.disc_loss += r.losses.disc_loss;
            losses.cls_source += r.losses.cls_loss_source;
            losses.cls_target += r.losses.cls_loss_target;
            stats.add(count_labels(r.pseudo_labels, truth, trows, config.num_classes));
        }
        if (!std::isfinite(losses.disc_loss + losses.cls_source + losses.cls_target)) {
            throw std::runtime_error("stage 2 diverged at epoch " + std::to_string(e));
        }
        losses.disc_loss /= nb;
        losses.cls_source /= nb;
        losses.cls_target /= nb;
        out.record.losses.push_back(losses);
        out.record.pseudo.push_back(stats);
        if (hook) hook(e, out.bundle);
    }
    freeze(out.state);
    return out;
}

std::vector<int> predict_all(const ModelBundle& bundle, const PseudoState& frozen_state, const Dataset& target,
                             Strategy strategy) {
    std::vector<int> pred;
    pred.reserve(target.size());
    for (const auto& s : target.samples()) {
        const auto [scores, thresholds] = build_matrices(bundle, frozen_state, s);
        pred.push_back(static_cast<int>(predict_strategy(strategy, scores, thresholds)));
    }
    return pred;
}

std::vector<StrategyReport> evaluate_run(const ModelBundle& bundle, const PseudoState& frozen_state,
                                         const Dataset& target, const std::vector<Strategy>& strategies) {
    if (!frozen_state.frozen()) throw ContractError("evaluate_run needs a frozen pseudo-label state");
    const std::span<const int> truth = EvaluationAccess::truth(target);
    std::vector<std::vector<int>> preds(strategies.size());
    for (const auto& s : target.samples()) {
        const auto [scores, thresholds] = build_matrices(bundle, frozen_state, s);
        for (std::size_t k = 0; k < strategies.size(); ++k) {
            preds[k].push_back(static_cast<int>(predict_strategy(strategies[k], scores, thresholds)));
        }
    }
    std::vector<StrategyReport> out;
    for (std::size_t k = 0; k < strategies.size(); ++k) {
        out.push_back({strategies[k], evaluate(preds[k], truth, target.num_classes())});
    }
    return out;
}

TrainOutcome train(const TrainConfig& config) { return train(config, make_data(config)); }

TrainOutcome train(const TrainConfig& config, const DataPair& data) {
    Stage1Result s1 = run_stage1(config, data.source);
    Stage2Result s2 = run_stage2(config, s1.bundle, data);
    TrainOutcome out{std::move(s2.bundle), std::move(s2.state), std::move(s1.record)};
    out.record.losses.insert(out.record.losses.end(), s2.record.losses.begin(), s2.record.losses.end());
    out.record.pseudo = std::move(s2.record.pseudo);
    out.record.reports = evaluate_run(out.bundle, out.state, data.target, config.strategies);
    return out;
}

std::vector<SimulationCell> simulate_fplg(const TrainConfig& config) { return simulate_fplg(config, make_data(config)); }

std::vector<SimulationCell> simulate_fplg(const TrainConfig& config, const DataPair& data) {
    config.validate();
    static const ThresholdPolicy policies[] = {ThresholdPolicy::sts, ThresholdPolicy::dts, ThresholdPolicy::idts};
    TrainConfig base = config;
    base.stage2_epochs = config.simulate_epochs;
    const Stage1Result s1 = run_stage1(base, data.source);
    const std::span<const int> truth = EvaluationAccess::truth(data.target);
    const std::size_t nt = data.target.size();
    std::vector<std::size_t> rows(nt);
    std::iota(rows.begin(), rows.end(), 0);

    std::vector<SimulationCell> cells;
    if (config.simulate_mode == "full") {
        for (double theta : config.theta_grid) {
            for (ThresholdPolicy p : policies) {
                TrainConfig cell_cfg = base;
                cell_cfg.theta = theta;
                cell_cfg.policy = p;
                const Stage2Result s2 = run_stage2(cell_cfg, s1.bundle, data);
                SimulationCell cell{p, theta, s2.record.pseudo, {}, sigma_table(s2.state)};
                cell.total.policy = p;
                cell.total.theta = theta;
                for (const auto& st : cell.epochs) cell.total.add(st);
                cells.push_back(std::move(cell));
            }
        }
        return cells;
    }

    // replay: per-epoch target scores from one adversarial run
    std::vector<std::vector<Tensor>> logits;
    run_stage2(base, s1.bundle, data, [&](std::size_t, const ModelBundle& b) {
        std::vector<Tensor> epoch;
        epoch.reserve(nt);
        for (const auto& s : data.target.samples()) epoch.push_back(classify_all(b, extract(b, s)));
        logits.push_back(std::move(epoch));
    });
    for (double theta : config.theta_grid) {
        for (ThresholdPolicy p : policies) {
            PseudoState state(config.num_classes, p, theta);
            SimulationCell cell{p, theta, {}, {}, {}};
            cell.total.policy = p;
            cell.total.theta = theta;
            for (std::size_t e = 0; e < logits.size(); ++e) {
                std::vector<PseudoLabelSet> labels;
                labels.reserve(nt);
                for (const auto& l : logits[e]) labels.push_back(gen_set(state, l));
                PseudoStats st = count_labels(labels, truth, rows, config.num_classes);
                st.epoch = e;
                st.policy = p;
                st.theta = theta;
                cell.total.add(st);
                cell.epochs.push_back(std::move(st));
            }
            cell.sigma = sigma_table(state);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

AblationResult run_ablation(const TrainConfig& config) {
    const DataPair data = make_data(config);
    AblationResult out;
    out.seed = config.seed;
    const std::vector<Strategy> glocal{Strategy::glocal};
    const Stage1Result s1 = run_stage1(config, data.source);
    PseudoState cold(config.num_classes, config.policy, config.theta);
    cold.freeze();
    out.stage1_only = evaluate_run(s1.bundle, cold, data.target, glocal)[0].report.accuracy;

    TrainConfig adv = config;
    adv.adversarial = true;
    adv.pseudo_labels = false;
    const Stage2Result a = run_stage2(adv, s1.bundle, data);
    out.adversarial = evaluate_run(a.bundle, a.state, data.target, glocal)[0].report.accuracy;

    TrainConfig full = config;
    full.adversarial = true;
    full.pseudo_labels = true;
    const Stage2Result f = run_stage2(full, s1.bundle, data);
    const auto reports = evaluate_run(f.bundle, f.state, data.target, {Strategy::glocal, Strategy::glpc});
    out.fplg = reports[0].report.accuracy;
    out.fplg_glpc = reports[1].report.accuracy;
    return out;
}

std::string losses_csv(const RunRecord& record) {
    std::ostringstream os;
    os << std::setprecision(17) << "stage,epoch,disc_loss,cls_source,cls_target\n";
    for (const auto& l : record.losses) {
        os << l.stage << ',' << l.epoch << ',' << l.disc_loss << ',' << l.cls_source << ',' << l.cls_target << '\n';
    }
    return os.str();
}

std::string pseudo_csv(const std::vector<PseudoStats>& stats, std::size_t num_classes) {
    std::ostringstream os;
    os << std::setprecision(17) << "epoch,policy,theta,GP,RP";
    for (std::size_t j = 0; j < num_classes; ++j) os << ",CP_class" << j;
    os << '\n';
    for (const auto& s : stats) {
        os << s.epoch << ',' << to_string(s.policy) << ',' << s.theta << ',' << s.gp() << ',' << s.rp();
        const auto cp = s.cp();
        for (std::size_t j = 0; j < num_classes; ++j) os << ',' << (j < cp.size() ? cp[j] : 0.0);
        os << '\n';
    }
    return os.str();
}

std::string metrics_csv(const std::vector<StrategyReport>& reports) {
    std::ostringstream os;
    os << std::setprecision(17) << "strategy,accuracy,macro_recall,macro_precision,macro_f1\n";
    for (const auto& r : reports) {
        os << to_string(r.strategy) << ',' << r.report.accuracy << ',' << r.report.macro_recall << ','
           << r.report.macro_precision << ',' << r.report.macro_f1 << '\n';
    }
    return os.str();
}

std::string simulation_csv(const std::vector<SimulationCell>& cells, std::size_t num_classes) {
    std::vector<PseudoStats> rows;
    for (const auto& c : cells) rows.insert(rows.end(), c.epochs.begin(), c.epochs.end());
    return pseudo_csv(rows, num_classes);
}

std::string simulation_summary_csv(const std::vector<SimulationCell>& cells, std::size_t num_classes) {
    std::ostringstream os;
    os << std::setprecision(17) << "policy,theta,GP,RP,classes_covered,view_class_pairs";
    for (std::size_t j = 0; j < num_classes; ++j) os << ",CP_class" << j;
    os << '\n';
    for (const auto& c : cells) {
        os << to_string(c.policy) << ',' << c.theta << ',' << c.total.gp() << ',' << c.total.rp() << ','
           << c.total.classes_covered() << ',' << c.view_class_pairs();
        const auto cp = c.total.cp();
        for (std::size_t j = 0; j < num_classes; ++j) os << ',' << (j < cp.size() ? cp[j] : 0.0);
        os << '\n';
    }
    return os.str();
}

std::string ablation_csv(const std::vector<AblationResult>& rows) {
    std::ostringstream os;
    os << std::setprecision(17) << "seed,stage1_only,adversarial,fplg,fplg_glpc\n";
    for (const auto& r : rows) {
        os << r.seed << ',' << r.stage1_only << ',' << r.adversarial << ',' << r.fplg << ',' << r.fplg_glpc << '\n';
    }
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace aglrls
