// Command-line front end: figure-preset experiments, standalone training and
// detection, food-web generation, the scaling study, and config validation.
//
// Exit codes: 0 success, 1 config validation failure, 2 runtime failure.

#include "rcdetect/rcdetect.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace rcdetect;

namespace {

json load_config_or_preset(const std::string& ref) {
    if (fs::exists(ref)) return json::parse(read_text(ref));
    return experiment_preset(ref);  // throws ConfigError for unknown names
}

void apply_overrides(json& cfg, const CLI::Option* seed_opt, std::uint64_t seed,
                     const std::string& arch, const CLI::Option* leak_opt, double leak,
                     int threads) {
    if (seed_opt->count()) cfg["seed"] = seed;
    if (!arch.empty()) cfg["detector"]["architecture"] = arch;
    if (leak_opt->count()) cfg["detector"]["leak"] = leak;
    if (threads > 0) cfg["threads"] = threads;
}

void print_metrics(const json& metrics) {
    std::cout << "localized channels: " << metrics.at("localized").dump() << "\n";
    if (metrics.contains("mse_disturbed"))
        std::cout << "mse disturbed:   " << metrics.at("mse_disturbed").get<double>() << "\n";
    if (metrics.contains("mse_undisturbed"))
        std::cout << "mse undisturbed: " << metrics.at("mse_undisturbed").get<double>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reservoir-computing disturbance identification for network-coupled dynamical systems"};
    app.require_subcommand(1);

    std::string config_ref, out_dir = "artifacts", arch, detector_dir, system_out;
    std::uint64_t seed = 0;
    double leak = 0.0;
    int threads = 0, netgen_n = 0;
    double netgen_xmax = -1.0;
    int netgen_retries = 1000;

    auto* validate_cmd = app.add_subcommand("validate", "Validate an experiment or scaling-study config");
    validate_cmd->add_option("config", config_ref, "Config file or preset name")->required();

    auto* experiment_cmd = app.add_subcommand("experiment", "Run a full train+detect experiment");
    experiment_cmd->add_option("config", config_ref, "Config file or preset name")->required();
    experiment_cmd->add_option("--out", out_dir, "Artifact directory");
    auto* exp_seed = experiment_cmd->add_option("--seed", seed, "Master seed override");
    experiment_cmd->add_option("--arch", arch, "Architecture override")
        ->check(CLI::IsMember({"standard", "pseudo-parallel"}));
    auto* exp_leak = experiment_cmd->add_option("--leak", leak, "Leak parameter override");
    experiment_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

    auto* train_cmd = app.add_subcommand("train", "Train a detector and persist it");
    train_cmd->add_option("config", config_ref, "Config file or preset name")->required();
    train_cmd->add_option("--out", out_dir, "Artifact directory");
    auto* train_seed = train_cmd->add_option("--seed", seed, "Master seed override");
    train_cmd->add_option("--arch", arch, "Architecture override")
        ->check(CLI::IsMember({"standard", "pseudo-parallel"}));
    auto* train_leak = train_cmd->add_option("--leak", leak, "Leak parameter override");
    train_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

    auto* detect_cmd = app.add_subcommand("detect", "Run detection with a persisted detector");
    detect_cmd->add_option("config", config_ref, "Config file or preset name")->required();
    detect_cmd->add_option("--detector", detector_dir, "Directory written by `train`")->required();
    detect_cmd->add_option("--out", out_dir, "Artifact directory");
    detect_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

    auto* netgen_cmd = app.add_subcommand("netgen", "Generate a random food web with a stable coexistence point");
    netgen_cmd->add_option("--size", netgen_n, "Species count (>= 5)")->required();
    auto* net_seed = netgen_cmd->add_option("--seed", seed, "Generation seed");
    netgen_cmd->add_option("--x-max", netgen_xmax, "Optional cap on the equilibrium values");
    netgen_cmd->add_option("--retries", netgen_retries, "Rejection budget");
    netgen_cmd->add_option("--out", system_out, "Output JSON file")->required();

    auto* scaling_cmd = app.add_subcommand("scaling-study", "Compare architectures over generated systems");
    scaling_cmd->add_option("config", config_ref, "Config file or 'desk' for the built-in grid")->required();
    scaling_cmd->add_option("--out", out_dir, "Artifact directory");
    auto* sc_seed = scaling_cmd->add_option("--seed", seed, "Master seed override");
    scaling_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) {
            json cfg;
            try {
                cfg = load_config_or_preset(config_ref);
            } catch (const std::exception& e) {
                std::cerr << "unreadable config: " << e.what() << "\n";
                return 1;
            }
            const bool scaling = cfg.contains("sizes");
            const auto errors = scaling ? validate_scaling_config(cfg) : validate_experiment_config(cfg);
            if (errors.empty()) {
                std::cout << "config valid (" << (scaling ? "scaling-study" : "experiment") << ")\n";
                return 0;
            }
            for (const auto& e : errors) std::cout << "error: " << e << "\n";
            return 1;
        }

        if (experiment_cmd->parsed()) {
            json cfg = load_config_or_preset(config_ref);
            apply_overrides(cfg, exp_seed, seed, arch, exp_leak, leak, threads);
            const auto outcome = run_experiment(cfg, out_dir);
            print_metrics(outcome.metrics);
            std::cout << "artifacts: " << outcome.directory.string() << "\n";
            return 0;
        }

        if (train_cmd->parsed()) {
            json cfg = load_config_or_preset(config_ref);
            apply_overrides(cfg, train_seed, seed, arch, train_leak, leak, threads);
            const ExperimentConfig c = parse_experiment_config(cfg);
            ModelBundle mb = build_model(c.model_spec);
            DetectorConfig dc;
            dc.architecture = c.architecture;
            dc.reservoir_size = c.reservoir_total > 0 ? c.reservoir_total / mb.model->nodes()
                                                      : c.reservoir_per_unit;
            dc.density = c.density;
            dc.spectral_radius = c.spectral_radius;
            dc.input_scale = c.input_scale;
            dc.leak = c.leak;
            dc.ridge_lambda = c.lambda;
            dc.washout = c.washout;
            dc.channel_map = mb.channel_map;
            dc.neighborhoods = mb.neighborhoods;
            dc.threads = c.threads;
            const Signal forcing = build_signal(c.forcing_spec, mb.channel_map.channels(),
                                                mix_seed(c.seed, salts::kForcing));
            const Vec x0 =
                draw_initial_condition(*mb.model, mix_seed(c.seed, salts::kInitialCondition));
            const Trajectory training = simulate(*mb.model, expand(forcing, mb.channel_map), x0,
                                                 0.0, c.train_horizon, c.dt);
            TrainedDetector det = train_from(*mb.model, training, forcing, dc, c.seed);
            Vec x0_inf = training.final_state();
            if (c.settled_start && c.settle > 0)
                x0_inf = simulate(*mb.model, Signal::zero(mb.model->state_size()), x0_inf, 0.0,
                                  c.settle, c.dt)
                             .final_state();
            calibrate_noise_floor(det, *mb.model, x0_inf, c.calibration, c.dt);
            det.manifest["inference_x0"] =
                std::vector<double>(x0_inf.data(), x0_inf.data() + x0_inf.size());
            fs::create_directories(out_dir);
            write_trajectory_csv(fs::path(out_dir) / "training_trajectory.csv", training);
            write_text(fs::path(out_dir) / "config.json", cfg.dump(2) + "\n");
            save_detector(det, fs::path(out_dir) / "detector");
            std::cout << "detector written to " << (fs::path(out_dir) / "detector").string() << "\n";
            return 0;
        }

        if (detect_cmd->parsed()) {
            json cfg = load_config_or_preset(config_ref);
            const ExperimentConfig c = parse_experiment_config(cfg);
            TrainedDetector det = load_detector(detector_dir);
            if (threads > 0) det.config.threads = threads;
            ModelBundle mb = build_model(c.model_spec);
            const Signal disturbance = build_signal(c.disturbance_spec, mb.channel_map.channels(),
                                                    mix_seed(c.seed, salts::kDisturbance));
            Vec x0_inf;
            if (det.manifest.contains("inference_x0")) {
                const auto v = det.manifest.at("inference_x0").get<std::vector<double>>();
                x0_inf = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
            } else {
                x0_inf = draw_initial_condition(*mb.model, mix_seed(c.seed, salts::kInitialCondition));
            }
            DetectionResult res = detect(det, *mb.model, &disturbance, x0_inf, c.horizon, c.dt,
                                         c.washout_inference);
            res.localized = localize(res, det, c.localization);
            fs::create_directories(out_dir);
            std::vector<std::string> names;
            Mat series(2 * det.channels(), res.samples());
            for (int ch = 0; ch < det.channels(); ++ch) {
                names.push_back("g" + std::to_string(ch + 1) + "_true");
                names.push_back("g" + std::to_string(ch + 1) + "_recovered");
                series.row(2 * ch) = res.truth.row(ch);
                series.row(2 * ch + 1) = res.recovered.row(ch);
            }
            write_series_csv(fs::path(out_dir) / "recovered_signals.csv", res.t0, res.dt, names,
                             series);
            json metrics = {{"localized", json::array()}};
            for (int ch : res.localized) metrics["localized"].push_back(ch + 1);
            const auto [mse_d, mse_u] = mse_report(res, res.true_disturbed);
            if (mse_d) metrics["mse_disturbed"] = *mse_d;
            if (mse_u) metrics["mse_undisturbed"] = *mse_u;
            write_text(fs::path(out_dir) / "metrics.json", metrics.dump(2) + "\n");
            print_metrics(metrics);
            return 0;
        }

        if (netgen_cmd->parsed()) {
            NetgenOptions opts;
            if (netgen_xmax > 0) opts.x_max = netgen_xmax;
            opts.max_retries = netgen_retries;
            const GeneratedSystem sys =
                generate_lv(netgen_n, net_seed->count() ? seed : 1, opts);
            write_text(system_out, sys.to_json().dump(2) + "\n");
            std::cout << "system written to " << system_out << " (rejections: " << sys.rejections
                      << ", min x*: " << sys.equilibrium.minCoeff()
                      << ", max x*: " << sys.equilibrium.maxCoeff() << ")\n";
            return 0;
        }

        if (scaling_cmd->parsed()) {
            json cfg = config_ref == "desk" ? scaling_study_preset()
                                            : json::parse(read_text(config_ref));
            if (sc_seed->count()) cfg["seed"] = seed;
            if (threads > 0) cfg["threads"] = threads;
            const auto out = run_scaling_study(cfg, out_dir);
            for (const auto& row : out.summary.at("aggregate"))
                std::cout << "N=" << row.at("N").get<int>() << " " << std::left
                          << row.at("architecture").get<std::string>()
                          << " mse_disturbed_mean=" << row.at("mse_disturbed_mean").get<double>()
                          << " mse_undisturbed_mean=" << row.at("mse_undisturbed_mean").get<double>()
                          << "\n";
            const auto& failures = out.summary.at("failures");
            if (!failures.empty()) std::cout << failures.size() << " realization(s) failed; see summary.json\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
