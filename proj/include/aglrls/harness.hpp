#pragma once

// Two-stage training protocol, strategy evaluation, the threshold-policy simulator and CSV reporting.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "aglrls/config.hpp"
#include "aglrls/fplg.hpp"
#include "aglrls/glpc.hpp"
#include "aglrls/metrics.hpp"
#include "aglrls/model.hpp"
#include "aglrls/synthdata.hpp"

namespace aglrls {

struct EpochLosses {
    std::string stage;  // "stage1" or "stage2"
    std::size_t epoch = 0;
    double disc_loss = 0.0;
    double cls_source = 0.0;
    double cls_target = 0.0;
};

/// Pseudo-label accounting for one epoch (or one simulator cell epoch).
struct PseudoStats {
    std::size_t epoch = 0;
    ThresholdPolicy policy = ThresholdPolicy::idts;
    double theta = kDefaultTheta;
    std::size_t decisions = 0;  // view-decisions taken (7 per target sample)
    std::size_t generated = 0;
    std::size_t correct = 0;
    std::vector<std::size_t> per_class;

    double gp() const;  // generated / decisions
    double rp() const;  // correct / generated, 0 when nothing was generated
    std::vector<double> cp() const;  // per_class / generated
    std::size_t classes_covered() const;
    void add(const PseudoStats& other);
};

struct StrategyReport {
    Strategy strategy = Strategy::glpc;
    EvalReport report;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::vector<EpochLosses> losses;
    std::vector<PseudoStats> pseudo;
    std::vector<StrategyReport> reports;
};

struct DataPair {
    Dataset source;
    Dataset target;
};

/// Loads `source_data`/`target_data` when both are set, otherwise generates from the config.
DataPair make_data(const TrainConfig& config);

struct Stage1Result {
    ModelBundle bundle;
    RunRecord record;
};

struct Stage2Result {
    ModelBundle bundle;
    PseudoState state;
    RunRecord record;
};

/// Called after every stage-2 epoch with the current bundle.
using EpochHook = std::function<void(std::size_t epoch, const ModelBundle&)>;

Stage1Result run_stage1(const TrainConfig& config);
Stage1Result run_stage1(const TrainConfig& config, const Dataset& source);

Stage2Result run_stage2(const TrainConfig& config, const ModelBundle& bundle);
Stage2Result run_stage2(const TrainConfig& config, const ModelBundle& bundle, const DataPair& data,
                        const EpochHook& hook = {});

/// Throws ContractError if the state is not frozen.
std::vector<StrategyReport> evaluate_run(const ModelBundle& bundle, const PseudoState& frozen_state,
                                         const Dataset& target, const std::vector<Strategy>& strategies);

/// Per-sample predictions for one strategy (replay helper for evaluate_run).
std::vector<int> predict_all(const ModelBundle& bundle, const PseudoState& frozen_state, const Dataset& target,
                             Strategy strategy);

struct TrainOutcome {
    ModelBundle bundle;
    PseudoState state;
    RunRecord record;
};

/// Stage 1, stage 2 and evaluation over config.strategies.
TrainOutcome train(const TrainConfig& config);
TrainOutcome train(const TrainConfig& config, const DataPair& data);

struct SimulationCell {
    ThresholdPolicy policy = ThresholdPolicy::idts;
    double theta = kDefaultTheta;
    std::vector<PseudoStats> epochs;
    PseudoStats total;
    std::vector<std::uint64_t> sigma;  // final counters, 7 x c

    /// (view, class) pairs that received at least one label.
    std::size_t view_class_pairs() const;
};

/// Sweeps config.theta_grid x {STS, DTS, IDTS}. `replay` trains one stage-2 run and replays the
/// recorded per-epoch target scores through fresh pseudo states; `full` trains every cell.
std::vector<SimulationCell> simulate_fplg(const TrainConfig& config);
std::vector<SimulationCell> simulate_fplg(const TrainConfig& config, const DataPair& data);

/// Target accuracies along the module ladder for one seed.
struct AblationResult {
    std::uint64_t seed = 0;
    double stage1_only = 0.0;       // GLocal inference
    double adversarial = 0.0;       // + adversarial stage 2, GLocal inference
    double fplg = 0.0;              // + pseudo labels, GLocal inference
    double fplg_glpc = 0.0;         // same bundle, GLPC inference
};

AblationResult run_ablation(const TrainConfig& config);

// CSV writers
std::string losses_csv(const RunRecord& record);
std::string pseudo_csv(const std::vector<PseudoStats>& stats, std::size_t num_classes);
std::string metrics_csv(const std::vector<StrategyReport>& reports);
std::string simulation_csv(const std::vector<SimulationCell>& cells, std::size_t num_classes);
std::string simulation_summary_csv(const std::vector<SimulationCell>& cells, std::size_t num_classes);
std::string ablation_csv(const std::vector<AblationResult>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace aglrls
