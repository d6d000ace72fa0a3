#include "aglrls/cli.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include "aglrls/config.hpp"
#include "aglrls/errors.hpp"
#include "aglrls/harness.hpp"
#include "aglrls/metrics.hpp"

namespace aglrls {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, bool out_required = true) {
    sub->add_option("--config", c.config, "key = value config file");
    sub->add_option("--seed", c.seed, "overrides the config seed");
    auto* o = sub->add_option("--out", c.out, "output directory");
    if (out_required) o->required();
}

TrainConfig resolve(const Common& c) {
    TrainConfig cfg;
    if (!c.config.empty()) {
        if (!fs::exists(c.config)) throw UsageError("config file not found: " + c.config);
        try {
            cfg = load_config(c.config);
        } catch (const ParseError& e) {
            throw UsageError(e.what());
        }
    }
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

fs::path prepare_out(const Common& c, const TrainConfig& cfg) {
    const fs::path dir(c.out);
    fs::create_directories(dir);
    write_text(dir / "config.txt", render_config(cfg));
    return dir;
}

void write_outcome(const fs::path& dir, const TrainConfig& cfg, const TrainOutcome& t) {
    write_text(dir / "losses.csv", losses_csv(t.record));
    write_text(dir / "pseudo.csv", pseudo_csv(t.record.pseudo, cfg.num_classes));
    write_text(dir / "metrics.csv", metrics_csv(t.record.reports));
    write_text(dir / "state.csv", serialize_state(t.state));
    save_checkpoint(t.bundle, dir / "model.ckpt");
    std::ostringstream run;
    run << "seed," << t.record.seed << "\nconfig_hash," << std::hex << std::setw(16) << std::setfill('0')
        << t.record.config_hash << '\n';
    write_text(dir / "run.csv", run.str());
}

std::string stats_report(const RankTable& table) {
    const auto ranks = friedman_avg_ranks(table);
    std::ostringstream os;
    os << "method,avg_rank\n" << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < table.k(); ++i) os << table.methods[i] << ',' << ranks[i] << '\n';
    os << "CD(alpha=0.05)=" << nemenyi_cd(table.k(), table.n(), 0.05) << '\n';
    os << "CD(alpha=0.10)=" << nemenyi_cd(table.k(), table.n(), 0.10) << '\n';
    return os.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-domain adaptation lab on synthetic six-region data", "aglrls"};
    app.require_subcommand(1);

    Common gen_opts, train_opts, eval_opts, sim_opts, abl_opts;
    std::string model_dir;
    std::string stats_input;
    std::string stats_out;
    std::vector<std::uint64_t> abl_seeds;

    auto* gen = app.add_subcommand("gen-data", "generate source and target datasets");
    add_common(gen, gen_opts);
    auto* tr = app.add_subcommand("train", "two-stage training and evaluation");
    add_common(tr, train_opts);
    auto* ev = app.add_subcommand("eval", "evaluate a trained model on the target domain");
    add_common(ev, eval_opts);
    ev->add_option("--model", model_dir, "directory written by train")->required();
    auto* sim = app.add_subcommand("simulate-fplg", "threshold policy sweep");
    add_common(sim, sim_opts);
    auto* st = app.add_subcommand("stats", "Friedman ranks and Nemenyi critical differences");
    st->add_option("--input", stats_input, "CSV with header method,setting,accuracy")->required();
    st->add_option("--out", stats_out, "output directory for ranks.csv");
    auto* abl = app.add_subcommand("ablation", "module ladder over several seeds");
    add_common(abl, abl_opts);
    abl->add_option("--seeds", abl_seeds, "seeds to run (default: the config seed)");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            const TrainConfig cfg = resolve(gen_opts);
            const fs::path dir = prepare_out(gen_opts, cfg);
            const DataPair data = make_data(cfg);
            save(data.source, dir / "source.txt");
            save(data.target, dir / "target.txt");
            out << "wrote " << data.source.size() << " source and " << data.target.size() << " target samples to "
                << dir.string() << '\n';
        } else if (tr->parsed()) {
            const TrainConfig cfg = resolve(train_opts);
            const fs::path dir = prepare_out(train_opts, cfg);
            const TrainOutcome t = train(cfg);
            write_outcome(dir, cfg, t);
            out << metrics_csv(t.record.reports);
        } else if (ev->parsed()) {
            const TrainConfig cfg = resolve(eval_opts);
            const fs::path mdir(model_dir);
            const ModelBundle bundle = load_checkpoint(mdir / "model.ckpt");
            const PseudoState state = parse_state(read_text(mdir / "state.csv"));
            if (!state.frozen()) throw ContractError("state.csv holds an unfrozen pseudo-label state");
            const fs::path dir = prepare_out(eval_opts, cfg);
            const DataPair data = make_data(cfg);
            const auto reports = evaluate_run(bundle, state, data.target, cfg.strategies);
            write_text(dir / "metrics.csv", metrics_csv(reports));
            out << metrics_csv(reports);
        } else if (sim->parsed()) {
            const TrainConfig cfg = resolve(sim_opts);
            const fs::path dir = prepare_out(sim_opts, cfg);
            const auto cells = simulate_fplg(cfg);
            write_text(dir / "pseudo.csv", simulation_csv(cells, cfg.num_classes));
            write_text(dir / "fplg_summary.csv", simulation_summary_csv(cells, cfg.num_classes));
            out << simulation_summary_csv(cells, cfg.num_classes);
        } else if (st->parsed()) {
            const RankTable table = parse_accuracy_csv(read_text(stats_input));
            const std::string report = stats_report(table);
            if (!stats_out.empty()) {
                fs::create_directories(stats_out);
                write_text(fs::path(stats_out) / "ranks.csv", report);
            }
            out << report;
        } else if (abl->parsed()) {
            TrainConfig cfg = resolve(abl_opts);
            const fs::path dir = prepare_out(abl_opts, cfg);
            if (abl_seeds.empty()) abl_seeds.push_back(cfg.seed);
            std::vector<AblationResult> rows;
            for (std::uint64_t s : abl_seeds) {
                cfg.seed = s;
                rows.push_back(run_ablation(cfg));
            }
            write_text(dir / "ablation.csv", ablation_csv(rows));
            out << ablation_csv(rows);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace aglrls
