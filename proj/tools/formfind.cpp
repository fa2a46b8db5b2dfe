// Command-line driver for the form-finding pipeline:
//   extract | train | predict | analyze | optimize | report

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "formfind/pipeline.hpp"

namespace pl = formfind::pipeline;

int main(int argc, char** argv) {
    CLI::App app{"Free-form grid-shell form finding"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    long long seed = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON");
        cmd->add_option("--seed", seed, "override the global seed");
        cmd->add_option("--out", out_dir, "output directory");
    };

    const char* names[] = {"extract", "train", "predict", "analyze", "optimize", "report"};
    const char* descs[] = {
        "sample curves into a sequential dataset and fold split",
        "train the sequence model and emit loss curves",
        "predicted-vs-actual report on the holdout fold",
        "single-model structural analysis",
        "multi-objective form-finding run",
        "regenerate figures and summary from existing outputs"};
    for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(names[i], descs[i]));

    CLI11_PARSE(app, argc, argv);

    pl::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = pl::load_config(config_path);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.out_dir = out_dir;

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "extract") pl::cmd_extract(cfg);
        else if (cmd == "train") pl::cmd_train(cfg);
        else if (cmd == "predict") pl::cmd_predict(cfg);
        else if (cmd == "analyze") pl::cmd_analyze(cfg);
        else if (cmd == "optimize") pl::cmd_optimize(cfg);
        else if (cmd == "report") pl::cmd_report(cfg);
    } catch (const pl::InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return pl::kExitInput;
    } catch (const pl::TrainError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return pl::kExitTrain;
    } catch (const pl::AnalysisError& e) {
        std::fprintf(stderr, "analysis error: %s\n", e.what());
        return pl::kExitAnalysis;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return pl::kExitInput;
    }
    return pl::kExitOk;
}
