#pragma once

// Command layer: each pipeline stage reads/writes files under an output
// directory, with atomic writes and a fixed exit-code contract
// (0 ok, 2 input error, 3 training failure, 4 analysis/optimization failure).

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "formfind/io.hpp"
#include "formfind/problem.hpp"
#include "formfind/svg.hpp"

namespace formfind::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AnalysisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitTrain = 3;
constexpr int kExitAnalysis = 4;

struct RunConfig {
    std::uint64_t seed = 42;
    fs::path out_dir = "out";

    // corpus generation
    int n_curves = 16;
    int n_segments = 20;
    std::vector<int> fold_sizes = {3, 3, 3, 3, 4};

    // optional input paths; empty means "use the generated/derived artifact"
    fs::path curves_path;
    fs::path grid_model_path;

    seqnet::ModelConfig model_config;
    seqnet::TrainConfig train_config;
    evo::GAConfig ga_config;
    evo::AnalysisConfig analysis;
    std::vector<frame::LoadCase> load_cases = {frame::LoadCase::gravity(),
                                               frame::LoadCase::mesh(0.02)};

    fs::path dataset_path() const { return out_dir / "dataset.csv"; }
    fs::path folds_path() const { return out_dir / "folds.json"; }
    fs::path curves_out_path() const { return out_dir / "curves.json"; }
    fs::path model_path() const { return out_dir / "model.json"; }
};

inline RunConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const std::exception& e) {
        throw InputError("config: " + std::string(e.what()));
    }
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.n_curves = j.value("n_curves", c.n_curves);
    c.n_segments = j.value("n_segments", c.n_segments);
    if (j.contains("fold_sizes")) c.fold_sizes = j.at("fold_sizes").get<std::vector<int>>();
    if (j.contains("curves")) c.curves_path = j.at("curves").get<std::string>();
    if (j.contains("grid_model")) c.grid_model_path = j.at("grid_model").get<std::string>();
    if (j.contains("model_config")) c.model_config = io::model_config_from_json(j.at("model_config"));
    if (j.contains("train_config")) {
        const auto& t = j.at("train_config");
        c.train_config.batch_size = t.value("batch_size", c.train_config.batch_size);
        c.train_config.epochs = t.value("epochs", c.train_config.epochs);
        c.train_config.learning_rate = t.value("learning_rate", c.train_config.learning_rate);
        c.train_config.plain_sgd = t.value("plain_sgd", c.train_config.plain_sgd);
    }
    if (j.contains("ga_config")) {
        const auto& g = j.at("ga_config");
        c.ga_config.population = g.value("population", c.ga_config.population);
        c.ga_config.generations = g.value("generations", c.ga_config.generations);
        c.ga_config.crossover_prob = g.value("crossover_prob", c.ga_config.crossover_prob);
        c.ga_config.sbx_eta = g.value("sbx_eta", c.ga_config.sbx_eta);
        c.ga_config.mutation_prob = g.value("mutation_prob", c.ga_config.mutation_prob);
        c.ga_config.mutation_eta = g.value("mutation_eta", c.ga_config.mutation_eta);
    }
    if (j.contains("analysis")) {
        const auto& a = j.at("analysis");
        if (a.contains("material")) c.analysis.material = io::material_from_json(a.at("material"));
        if (a.contains("section")) c.analysis.section = io::section_from_json(a.at("section"));
        c.analysis.mesh_load = a.value("mesh_load", c.analysis.mesh_load);
        c.analysis.grid_nu = a.value("grid_nu", c.analysis.grid_nu);
        c.analysis.grid_nv = a.value("grid_nv", c.analysis.grid_nv);
        c.analysis.loft_degree_v = a.value("loft_degree_v", c.analysis.loft_degree_v);
        c.analysis.curvature_cap = a.value("curvature_cap", c.analysis.curvature_cap);
    }
    if (j.contains("load_cases")) {
        c.load_cases.clear();
        for (const auto& lc : j.at("load_cases")) {
            const std::string kind = lc.at("kind").get<std::string>();
            if (kind == "gravity") c.load_cases.push_back(frame::LoadCase::gravity());
            else if (kind == "mesh")
                c.load_cases.push_back(frame::LoadCase::mesh(lc.value("magnitude", 0.02)));
            else throw InputError("unknown load case kind: " + kind);
        }
    }
    return c;
}

// ---- extract ----

inline std::vector<geom::NurbsCurve> load_or_generate_curves(const RunConfig& cfg) {
    if (!cfg.curves_path.empty()) {
        try {
            return io::curves_from_json(json::parse(io::read_file(cfg.curves_path)));
        } catch (const std::exception& e) {
            throw InputError("curves: " + std::string(e.what()));
        }
    }
    return data::synth_corpus(cfg.seed, cfg.n_curves, cfg.analysis.effective_curvature_cap());
}

inline void cmd_extract(const RunConfig& cfg) {
    const auto curves = load_or_generate_curves(cfg);
    data::SequenceDataset ds;
    data::FoldSpec folds;
    try {
        ds = data::curves_to_dataset(curves, cfg.n_segments);
        folds = data::kfold_split(ds, cfg.fold_sizes, cfg.seed);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    fs::create_directories(cfg.out_dir);
    std::ostringstream csv;
    data::write_dataset_csv(ds, csv);
    io::atomic_write(cfg.dataset_path(), csv.str());
    io::atomic_write(cfg.folds_path(), io::folds_to_json(folds).dump(2) + "\n");
    io::atomic_write(cfg.curves_out_path(), io::curves_to_json(curves).dump(2) + "\n");
}

// ---- train ----

inline void cmd_train(const RunConfig& cfg) {
    data::SequenceDataset raw;
    data::FoldSpec folds;
    try {
        raw = data::read_dataset_csv_file(cfg.dataset_path().string());
        folds = io::folds_from_json(json::parse(io::read_file(cfg.folds_path())));
        folds.validate(raw.sequences.size());
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }

    // the last fold is the holdout; stats come from the training folds only
    std::vector<int> train_folds;
    for (std::size_t k = 0; k + 1 < folds.folds.size(); ++k)
        train_folds.push_back(static_cast<int>(k));
    if (train_folds.empty()) train_folds.push_back(0);

    seqnet::TrainConfig tc = cfg.train_config;
    tc.seed = cfg.seed;
    seqnet::TrainResult result;
    data::SequenceDataset normalized;
    try {
        normalized = data::normalize(raw, folds, train_folds);
        result = seqnet::train(normalized, folds, cfg.model_config, tc);
    } catch (const std::exception& e) {
        throw TrainError(e.what());
    }

    fs::create_directories(cfg.out_dir);
    io::TrainedModel model{cfg.model_config, std::move(result.params),
                           normalized.feature_stats, normalized.target_stats};
    io::atomic_write(cfg.model_path(), io::trained_model_to_json(model).dump() + "\n");

    std::ostringstream loss_csv;
    loss_csv << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e)
        loss_csv << e << ',' << util::format_double(result.loss_history[e]) << ','
                 << util::format_double(result.val_history[e]) << "\n";
    io::atomic_write(cfg.out_dir / "loss.csv", loss_csv.str());

    svg::Series train_s{"train", "rgb(31,119,180)", {}, {}};
    svg::Series val_s{"validation", "rgb(214,39,40)", {}, {}};
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        train_s.x.push_back(static_cast<double>(e));
        train_s.y.push_back(result.loss_history[e]);
        val_s.x.push_back(static_cast<double>(e));
        val_s.y.push_back(result.val_history[e]);
    }
    io::atomic_write(cfg.out_dir / "loss.svg",
                     svg::line_chart("Training loss", {train_s, val_s}));
}

// ---- predict ----

inline constexpr const char* kPredictionHeader =
    "u,actual_curvature,pred_curvature,actual_tx,pred_tx,actual_ty,pred_ty,actual_tz,pred_tz";

inline void cmd_predict(const RunConfig& cfg) {
    io::TrainedModel model;
    data::SequenceDataset raw;
    data::FoldSpec folds;
    try {
        model = io::trained_model_from_json(json::parse(io::read_file(cfg.model_path())));
        raw = data::read_dataset_csv_file(cfg.dataset_path().string());
        folds = io::folds_from_json(json::parse(io::read_file(cfg.folds_path())));
        folds.validate(raw.sequences.size());
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    const auto& holdout = folds.folds.back();
    if (holdout.empty()) throw InputError("holdout fold is empty");

    std::ostringstream csv;
    csv << kPredictionHeader << "\n";
    // channel index -> (actual series, predicted series), flattened over curves
    std::vector<svg::Series> actual(4), predicted(4);
    const char* names[4] = {"curvature", "tx", "ty", "tz"};
    for (int k = 0; k < 4; ++k) {
        actual[k] = {"actual", "rgb(31,119,180)", {}, {}};
        predicted[k] = {"predicted", "rgb(214,39,40)", {}, {}};
    }
    double idx = 0;
    for (int curve_id : holdout) {
        const auto& seq = raw.sequences.at(curve_id);
        std::vector<std::array<double, 4>> pts;
        for (const auto& r : seq) pts.push_back({r.x, r.y, r.z, r.u});
        const auto pred = seqnet::predict_curve_properties(model.params, model.config,
                                                           model.feature_stats,
                                                           model.target_stats, pts);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            const auto& r = seq[i];
            const double act[4] = {r.curvature, r.tangent_x, r.tangent_y, r.tangent_z};
            const double prd[4] = {pred[i].curvature, pred[i].tangent.x(), pred[i].tangent.y(),
                                   pred[i].tangent.z()};
            csv << util::format_double(r.u);
            for (int k = 0; k < 4; ++k)
                csv << ',' << util::format_double(act[k]) << ',' << util::format_double(prd[k]);
            csv << "\n";
            for (int k = 0; k < 4; ++k) {
                actual[k].x.push_back(idx);
                actual[k].y.push_back(act[k]);
                predicted[k].x.push_back(idx);
                predicted[k].y.push_back(prd[k]);
            }
            idx += 1;
        }
    }
    fs::create_directories(cfg.out_dir);
    io::atomic_write(cfg.out_dir / "predictions.csv", csv.str());
    std::vector<std::pair<std::string, std::vector<svg::Series>>> panels;
    for (int k = 0; k < 4; ++k)
        panels.push_back({names[k], {actual[k], predicted[k]}});
    io::atomic_write(cfg.out_dir / "predictions.svg",
                     svg::panel_chart("Predicted vs actual (holdout fold)", panels));
}

// ---- analyze ----

inline frame::GridModel baseline_reference_model(const RunConfig& cfg) {
    auto rp = evo::make_reference_problem();
    rp.analysis = cfg.analysis;
    const auto surface = geom::loft_surface(rp.base_curves, rp.analysis.loft_degree_v);
    const auto shell = geom::extract_grid(surface, rp.analysis.grid_nu, rp.analysis.grid_nv);
    return frame::make_grid_model(shell, rp.analysis.material, rp.analysis.section);
}

inline json analyze_model(const RunConfig& cfg, const frame::GridModel& model,
                          std::string* figure_out) {
    std::vector<frame::AnalysisResult> results;
    frame::ObjectiveInputs obj;
    try {
        std::tie(results, obj) = frame::analyze(model, cfg.load_cases);
    } catch (const std::exception& e) {
        throw AnalysisError(e.what());
    }
    json j;
    json cases = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        json c = io::analysis_result_to_json(results[i]);
        c["kind"] = cfg.load_cases[i].kind == frame::LoadCase::Kind::gravity ? "gravity" : "mesh";
        cases.push_back(c);
    }
    j["cases"] = cases;
    j["objectives"] = {{"u_gravity", obj.u_gravity},
                       {"u_mesh", obj.u_mesh},
                       {"mass", obj.mass},
                       {"sigma_max", obj.sigma_max},
                       {"max_z_displacement", obj.max_z_displacement}};
    if (figure_out && !results.empty())
        *figure_out = svg::displacement_figure("Displacement", model, results.front().displacements);
    return j;
}

inline void cmd_analyze(const RunConfig& cfg) {
    frame::GridModel model;
    if (!cfg.grid_model_path.empty()) {
        try {
            model = io::grid_model_from_json(json::parse(io::read_file(cfg.grid_model_path)));
        } catch (const std::exception& e) {
            throw InputError(e.what());
        }
    } else {
        model = baseline_reference_model(cfg);
    }
    std::string figure;
    const json j = analyze_model(cfg, model, &figure);
    fs::create_directories(cfg.out_dir);
    io::atomic_write(cfg.out_dir / "analysis.json", j.dump(2) + "\n");
    io::atomic_write(cfg.out_dir / "displacement.svg", figure);
}

// ---- optimize ----

inline json history_report_json(const evo::RunHistory& history) {
    const auto report = evo::convergence_report(history);
    const char* names[4] = {"u_gravity", "u_mesh", "mass", "sigma_max"};
    json j;
    for (std::size_t k = 0; k < report.size() && k < 4; ++k)
        j[names[k]] = {{"initial", report[k].initial},
                       {"best", report[k].best},
                       {"reduction_percent", report[k].reduction_percent}};
    return j;
}

inline std::string history_csv(const evo::RunHistory& history) {
    std::ostringstream os;
    os << "generation,best_U_gravity,best_U_mesh,best_mass,best_sigma\n";
    for (std::size_t g = 0; g < history.generations.size(); ++g) {
        os << g;
        for (double b : history.generations[g].best) os << ',' << util::format_double(b);
        os << "\n";
    }
    return os.str();
}

inline std::string convergence_figure(const evo::RunHistory& history) {
    const char* names[4] = {"U_gravity", "U_mesh", "mass", "sigma_max"};
    std::vector<std::pair<std::string, std::vector<svg::Series>>> panels;
    for (int k = 0; k < 4; ++k) {
        svg::Series s{"best per generation", "rgb(31,119,180)", {}, {}};
        for (std::size_t g = 0; g < history.generations.size(); ++g) {
            s.x.push_back(static_cast<double>(g));
            s.y.push_back(history.generations[g].best[k]);
        }
        panels.push_back({names[k], {s}});
    }
    return svg::panel_chart("Optimization convergence", panels);
}

inline void cmd_optimize(const RunConfig& cfg) {
    auto rp = evo::make_reference_problem();
    rp.analysis = cfg.analysis;
    evo::GAConfig ga = cfg.ga_config;
    ga.seed = cfg.seed;

    evo::RunHistory history;
    try {
        history = evo::run(rp.as_problem(), ga);
    } catch (const std::exception& e) {
        throw AnalysisError(e.what());
    }

    fs::create_directories(cfg.out_dir);
    io::atomic_write(cfg.out_dir / "history.csv", history_csv(history));
    io::atomic_write(cfg.out_dir / "archive.json", io::archive_to_json(history).dump(2) + "\n");
    io::atomic_write(cfg.out_dir / "convergence.svg", convergence_figure(history));
    io::atomic_write(cfg.out_dir / "report.json", history_report_json(history).dump(2) + "\n");

    // best-compromise member of the final front: minimal normalized-objective sum
    const auto& front = history.final_front;
    std::vector<double> lo(4, 1e300), hi(4, -1e300);
    for (const auto& e : front)
        for (int k = 0; k < 4; ++k) {
            lo[k] = std::min(lo[k], e.objectives[k]);
            hi[k] = std::max(hi[k], e.objectives[k]);
        }
    std::size_t best_idx = 0;
    double best_sum = 1e300;
    for (std::size_t i = 0; i < front.size(); ++i) {
        double sum = 0;
        for (int k = 0; k < 4; ++k)
            sum += hi[k] > lo[k] ? (front[i].objectives[k] - lo[k]) / (hi[k] - lo[k]) : 0.0;
        if (sum < best_sum) {
            best_sum = sum;
            best_idx = i;
        }
    }

    auto model_for = [&](const evo::DesignVector& design) {
        const auto curves = evo::apply_design(rp.base_curves, rp.variable_spec, design);
        const auto surface = geom::loft_surface(curves, rp.analysis.loft_degree_v);
        const auto shell = geom::extract_grid(surface, rp.analysis.grid_nu, rp.analysis.grid_nv);
        return frame::make_grid_model(shell, rp.analysis.material, rp.analysis.section);
    };
    const frame::GridModel initial = model_for(rp.baseline);
    const frame::GridModel final_model = model_for(front[best_idx].design);
    io::atomic_write(cfg.out_dir / "baseline_model.json",
                     io::grid_model_to_json(initial).dump(2) + "\n");
    io::atomic_write(cfg.out_dir / "optimized_model.json",
                     io::grid_model_to_json(final_model).dump(2) + "\n");

    std::string fig_initial, fig_final;
    analyze_model(cfg, initial, &fig_initial);
    analyze_model(cfg, final_model, &fig_final);
    io::atomic_write(cfg.out_dir / "displacement_initial.svg", fig_initial);
    io::atomic_write(cfg.out_dir / "displacement_final.svg", fig_final);
}

// ---- report ----

// Regenerate figures and the convergence summary from previously written CSVs.
inline void cmd_report(const RunConfig& cfg) {
    std::string csv;
    try {
        csv = io::read_file(cfg.out_dir / "history.csv");
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    evo::RunHistory history;
    std::vector<double> best_so_far(4, 1e300);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        evo::GenerationRecord rec;
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, ',');  // generation index
        while (std::getline(ls, tok, ',')) rec.best.push_back(std::stod(tok));
        if (rec.best.size() != 4) throw InputError("history.csv: expected 4 objectives per row");
        for (int k = 0; k < 4; ++k) best_so_far[k] = std::min(best_so_far[k], rec.best[k]);
        rec.best_so_far = best_so_far;
        history.generations.push_back(std::move(rec));
    }
    if (history.generations.empty()) throw InputError("history.csv: no data rows");
    io::atomic_write(cfg.out_dir / "convergence.svg", convergence_figure(history));
    io::atomic_write(cfg.out_dir / "report.json", history_report_json(history).dump(2) + "\n");
}

}  // namespace formfind::pipeline
