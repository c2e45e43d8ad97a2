#pragma once

// Config-driven experiment pipelines: single train/detect experiments (the
// figure presets) and the standard-vs-pseudo-parallel scaling study. Configs
// are strict JSON documents; unknown keys are rejected, all randomness flows
// from the master seed, and every artifact directory is reproducible from the
// resolved config it contains.

#include "rcdetect/common.hpp"
#include "rcdetect/detector.hpp"
#include "rcdetect/matrixio.hpp"
#include "rcdetect/models.hpp"
#include "rcdetect/netgen.hpp"
#include "rcdetect/reservoir.hpp"
#include "rcdetect/signals.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

namespace rcdetect {

namespace salts {
// Sub-seed derivation salts; fixed so that manifests pin every stream.
constexpr std::uint64_t kInitialCondition = 0xA001;
constexpr std::uint64_t kForcing = 0xA002;
constexpr std::uint64_t kDisturbance = 0xA003;
constexpr std::uint64_t kSystem = 0xA004;
}  // namespace salts

// ---------------------------------------------------------------------------
// Validation helpers
// ---------------------------------------------------------------------------

inline void check_keys(const json& j, const std::vector<std::string>& allowed,
                       const std::string& context, std::vector<std::string>& errors) {
    if (!j.is_object()) {
        errors.push_back(context + ": expected an object");
        return;
    }
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            errors.push_back(context + ": unknown key '" + key + "'");
    }
}

namespace detail {

inline double get_num(const json& j, const std::string& key, const std::string& ctx,
                      std::vector<std::string>& errors, double fallback = 0.0) {
    if (!j.contains(key)) {
        errors.push_back(ctx + ": missing required key '" + key + "'");
        return fallback;
    }
    if (!j.at(key).is_number()) {
        errors.push_back(ctx + ": '" + key + "' must be a number");
        return fallback;
    }
    return j.at(key).get<double>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

struct ModelBundle {
    std::unique_ptr<NetworkModel> model;
    ChannelMap channel_map;
    std::vector<std::vector<int>> neighborhoods;
    json resolved;  // self-contained model spec (presets and files inlined)
};

inline ModelBundle build_model(const json& spec) {
    json resolved = spec;
    if (spec.contains("preset")) {
        const std::string name = spec.at("preset").get<std::string>();
        if (name == "lv8")
            resolved = lv8_preset().to_json();
        else if (name == "wc4-stationary")
            resolved = wc4_preset(true).to_json();
        else if (name == "wc4-oscillatory")
            resolved = wc4_preset(false).to_json();
        else
            throw ConfigError("model: unknown preset '" + name + "'");
    } else if (spec.contains("file")) {
        resolved = json::parse(read_text(spec.at("file").get<std::string>()));
    }
    ModelBundle b;
    const std::string type = resolved.at("type").get<std::string>();
    if (type == "lotka_volterra") {
        auto params = LotkaVolterraParams::from_json(resolved);
        b.channel_map = ChannelMap::identity(params.size());
        b.neighborhoods = lv_neighborhoods(params);
        b.model = std::make_unique<LotkaVolterraModel>(std::move(params));
    } else if (type == "wilson_cowan") {
        auto params = WilsonCowanParams::from_json(resolved);
        b.channel_map = ChannelMap::wc_excitatory(params.pairs);
        b.neighborhoods = wc_neighborhoods(params);
        b.model = std::make_unique<WilsonCowanModel>(std::move(params));
    } else {
        throw ConfigError("model: unknown type '" + type + "'");
    }
    b.resolved = std::move(resolved);
    return b;
}

/// Training initial condition: biomasses U[0.5, 1.5] per species for the food
/// web, activities U[0, 0.5] per component for neural masses.
inline Vec draw_initial_condition(const NetworkModel& model, std::uint64_t seed) {
    Rng rng(seed);
    Vec x0(model.state_size());
    const bool lv = model.name() == "lotka_volterra";
    for (int i = 0; i < model.state_size(); ++i)
        x0[i] = lv ? rng.uniform(0.5, 1.5) : rng.uniform(0.0, 0.5);
    return x0;
}

// ---------------------------------------------------------------------------
// Signal construction from config specs
// ---------------------------------------------------------------------------

/// Builds a forcing/disturbance signal from a config spec. Constructor-style
/// specs (sinusoid_bank, random_steps, random_ensemble) draw from the given
/// seed; realized-metadata specs are rebuilt exactly.
inline Signal build_signal(const json& spec, int channels, std::uint64_t seed) {
    const std::string type = spec.at("type").get<std::string>();
    if (type == "sinusoid_bank") {
        const auto range = spec.at("freq_range").get<std::vector<double>>();
        require(range.size() == 2, "sinusoid_bank: freq_range must be [low, high]");
        return sinusoid_bank(channels, spec.at("amplitude").get<double>(), range[0], range[1], seed);
    }
    if (type == "random_steps") {
        const auto range = spec.at("range").get<std::vector<double>>();
        require(range.size() == 2, "random_steps: range must be [low, high]");
        return random_steps(channels, spec.at("intervals").get<int>(),
                            spec.at("interval_length").get<double>(), range[0], range[1], seed);
    }
    if (type == "random_ensemble")
        return random_disturbance_ensemble(channels, spec.at("fraction").get<double>(), seed);
    if (type == "heaviside") {
        std::vector<HeavisidePulse> pulses;
        for (const auto& p : spec.at("pulses")) {
            HeavisidePulse h;
            h.channel = p.at("channel").get<int>() - 1;
            h.t_on = p.at("t_on").get<double>();
            h.level = p.at("level").get<double>();
            if (p.contains("t_off") && !p.at("t_off").is_null()) h.t_off = p.at("t_off").get<double>();
            pulses.push_back(h);
        }
        return heaviside(channels, pulses);
    }
    if (type == "composed_sigmoid") {
        const int channel = spec.value("channel", 1) - 1;
        return composed_sigmoid_disturbance(channels, channel);
    }
    if (type == "pseudo_sinusoid_pair" || type == "zero" || type == "sinusoids" ||
        type == "steps" || type == "mixed_sines" || type == "mapped") {
        json meta = spec;
        if (type == "zero") meta["channels"] = channels;
        Signal s = Signal::from_metadata(meta);
        require(s.channels() == channels, "signal: channel count does not match the model");
        return s;
    }
    throw ConfigError("signal: unknown type '" + type + "'");
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    json raw;  // resolved, self-contained document

    // parsed fields
    std::uint64_t seed = 0;
    json model_spec, forcing_spec, disturbance_spec;
    Architecture architecture = Architecture::standard;
    int reservoir_total = -1;    // exactly one of total/per-unit is set
    int reservoir_per_unit = -1;
    double density = -1.0;
    double spectral_radius = 1.2;
    double input_scale = 0.01;
    double leak = 0.0;
    double lambda = 1e-6;
    int washout = -1;
    double train_horizon = 0, horizon = 0, dt = 0, settle = 0, calibration = 0;
    int washout_inference = -1;
    bool settled_start = true;
    ThresholdPolicy localization;
    int threads = 1;
};

inline const std::vector<std::string>& experiment_config_keys() {
    static const std::vector<std::string> keys = {
        "comment", "seed", "model", "forcing", "disturbance", "detector", "times",
        "x0_mode", "localization", "threads"};
    return keys;
}

/// Full schema and cross-field validation; returns every problem found.
inline std::vector<std::string> validate_experiment_config(const json& cfg) {
    std::vector<std::string> errors;
    check_keys(cfg, experiment_config_keys(), "config", errors);
    if (!cfg.is_object()) return errors;

    for (const char* req : {"seed", "model", "forcing", "disturbance", "detector", "times"})
        if (!cfg.contains(req)) errors.push_back(std::string("config: missing section '") + req + "'");

    if (cfg.contains("seed") && !cfg.at("seed").is_number_unsigned())
        errors.push_back("config: 'seed' must be a nonnegative integer");

    int channels = -1, nodes = -1;
    if (cfg.contains("model")) {
        check_keys(cfg.at("model"),
                   {"preset", "file", "type", "growth", "capacity", "interaction_triplets",
                    "equilibrium", "seed", "rejections", "pairs", "tau", "w_ee", "w_ei", "w_ie",
                    "w_ii", "w_net", "k_sig", "sigma", "stimulus", "adjacency"},
                   "model", errors);
        try {
            const ModelBundle b = build_model(cfg.at("model"));
            channels = b.channel_map.channels();
            nodes = b.model->nodes();
        } catch (const std::exception& e) {
            errors.push_back(std::string("model: ") + e.what());
        }
    }

    auto check_signal = [&](const char* section) {
        if (!cfg.contains(section)) return;
        const json& s = cfg.at(section);
        check_keys(s,
                   {"type", "amplitude", "freq_range", "intervals", "interval_length", "range",
                    "fraction", "pulses", "channel", "channels", "frequencies", "schedules",
                    "entries", "drop", "rise", "map", "inner", "slot"},
                   section, errors);
        if (!s.contains("type")) {
            errors.push_back(std::string(section) + ": missing 'type'");
            return;
        }
        if (s.contains("slot") && s.at("slot").get<std::string>() != "E")
            errors.push_back(std::string(section) +
                             ": signals act on excitatory slots only; 'slot' must be \"E\" "
                             "(inhibitory-slot disturbances violate the disturbance model)");
        if (s.contains("pulses")) {
            for (const auto& p : s.at("pulses")) {
                check_keys(p, {"channel", "t_on", "t_off", "level"}, std::string(section) + ".pulses", errors);
                if (channels > 0 && p.contains("channel")) {
                    const int c = p.at("channel").get<int>();
                    if (c < 1 || c > channels)
                        errors.push_back(std::string(section) + ": channel " + std::to_string(c) +
                                         " out of range 1.." + std::to_string(channels));
                }
            }
        }
        if (s.contains("channel") && channels > 0) {
            const int c = s.at("channel").get<int>();
            if (c < 1 || c > channels)
                errors.push_back(std::string(section) + ": channel " + std::to_string(c) +
                                 " out of range 1.." + std::to_string(channels));
        }
        if (channels > 0) {
            try {
                build_signal(s, channels, 1);
            } catch (const std::exception& e) {
                errors.push_back(std::string(section) + ": " + e.what());
            }
        }
    };
    check_signal("forcing");
    check_signal("disturbance");

    if (cfg.contains("detector")) {
        const json& d = cfg.at("detector");
        check_keys(d,
                   {"architecture", "reservoir_size_total", "reservoir_size_per_unit", "density",
                    "spectral_radius", "input_scale", "leak", "lambda", "washout"},
                   "detector", errors);
        if (d.contains("architecture")) {
            try {
                architecture_from_string(d.at("architecture").get<std::string>());
            } catch (const std::exception& e) {
                errors.push_back(e.what());
            }
        }
        const bool has_total = d.contains("reservoir_size_total") && !d.at("reservoir_size_total").is_null();
        const bool has_per = d.contains("reservoir_size_per_unit") && !d.at("reservoir_size_per_unit").is_null();
        if (has_total == has_per)
            errors.push_back("detector: specify exactly one of reservoir_size_total / reservoir_size_per_unit");
        if (has_total && nodes > 0) {
            const int total = d.at("reservoir_size_total").get<int>();
            if (total < nodes || total % nodes != 0)
                errors.push_back("detector: reservoir_size_total " + std::to_string(total) +
                                 " must be a positive multiple of the node count " + std::to_string(nodes));
        }
        if (d.contains("leak")) {
            const double a = d.at("leak").get<double>();
            if (a < 0.0 || a > 1.0) errors.push_back("detector: leak must lie in [0,1]");
        }
        if (d.contains("lambda") && d.at("lambda").get<double>() < 0.0)
            errors.push_back("detector: lambda must be nonnegative");
    }

    if (cfg.contains("times")) {
        const json& t = cfg.at("times");
        check_keys(t, {"train_horizon", "horizon", "dt", "settle", "calibration", "washout_inference"},
                   "times", errors);
        const double dt = detail::get_num(t, "dt", "times", errors);
        if (t.contains("dt") && !(dt > 0.0)) errors.push_back("times: dt must be positive");
        const double th = detail::get_num(t, "train_horizon", "times", errors);
        if (t.contains("train_horizon") && !(th > 0.0))
            errors.push_back("times: train_horizon must be positive");
        const double h = detail::get_num(t, "horizon", "times", errors);
        if (t.contains("horizon") && !(h > 0.0)) errors.push_back("times: horizon must be positive");
        if (dt > 0 && th > 0 && th / dt < 10)
            errors.push_back("times: train_horizon must cover at least 10 steps");
    }

    if (cfg.contains("x0_mode")) {
        const std::string mode = cfg.at("x0_mode").get<std::string>();
        if (mode != "settled" && mode != "final_training")
            errors.push_back("config: x0_mode must be 'settled' or 'final_training'");
    }
    if (cfg.contains("localization")) {
        check_keys(cfg.at("localization"), {"kappa", "quantile", "use_quantile"}, "localization", errors);
    }
    return errors;
}

inline ExperimentConfig parse_experiment_config(const json& cfg) {
    const auto errors = validate_experiment_config(cfg);
    if (!errors.empty()) {
        std::string msg = "invalid experiment config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    ExperimentConfig c;
    c.raw = cfg;
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.model_spec = cfg.at("model");
    c.forcing_spec = cfg.at("forcing");
    c.disturbance_spec = cfg.at("disturbance");
    const json& d = cfg.at("detector");
    if (d.contains("architecture"))
        c.architecture = architecture_from_string(d.at("architecture").get<std::string>());
    if (d.contains("reservoir_size_total") && !d.at("reservoir_size_total").is_null())
        c.reservoir_total = d.at("reservoir_size_total").get<int>();
    else
        c.reservoir_per_unit = d.at("reservoir_size_per_unit").get<int>();
    c.density = d.value("density", -1.0);
    c.spectral_radius = d.value("spectral_radius", 1.2);
    c.input_scale = d.value("input_scale", 0.01);
    c.leak = d.value("leak", 0.0);
    c.lambda = d.value("lambda", 1e-6);
    c.washout = d.value("washout", -1);
    const json& t = cfg.at("times");
    c.train_horizon = t.at("train_horizon").get<double>();
    c.horizon = t.at("horizon").get<double>();
    c.dt = t.at("dt").get<double>();
    c.settle = t.value("settle", 0.0);
    c.calibration = t.value("calibration", c.horizon);
    c.washout_inference = t.contains("washout_inference") && !t.at("washout_inference").is_null()
                              ? t.at("washout_inference").get<int>()
                              : -1;
    c.settled_start = cfg.value("x0_mode", "settled") == std::string("settled");
    if (cfg.contains("localization")) {
        const json& l = cfg.at("localization");
        c.localization.kappa = l.value("kappa", 3.0);
        c.localization.quantile = l.value("quantile", 0.25);
        c.localization.use_quantile = l.value("use_quantile", true);
    }
    c.threads = cfg.value("threads", 1);
    return c;
}

// ---------------------------------------------------------------------------
// Figure presets
// ---------------------------------------------------------------------------

inline json experiment_preset(const std::string& name) {
    json base = {
        {"seed", 2024},
        {"detector", {{"architecture", "standard"}, {"reservoir_size_total", 1000},
                      {"spectral_radius", 1.2}, {"input_scale", 0.01}, {"leak", 0.0},
                      {"lambda", 1e-6}}},
        {"x0_mode", "settled"},
    };
    if (name == "fig3") {
        base["comment"] =
            "Food web under sinusoid training forcing; pseudo-sinusoidal disturbances on "
            "species 3 and 5. Inference horizon read from the figure axes.";
        base["model"] = {{"preset", "lv8"}};
        base["forcing"] = {{"type", "sinusoid_bank"}, {"amplitude", 0.8}, {"freq_range", {1.0, 9.0}}};
        base["disturbance"] = {{"type", "pseudo_sinusoid_pair"}};
        base["times"] = {{"train_horizon", 100.0}, {"horizon", 30.0}, {"dt", 0.005},
                         {"settle", 50.0}, {"calibration", 30.0}};
        return base;
    }
    if (name == "fig4") {
        base["comment"] =
            "Food web under random-step training forcing; persistent step disturbances of "
            "-0.1 and 0.15 on species 3 and 5 switching on at t=6.667.";
        base["model"] = {{"preset", "lv8"}};
        base["forcing"] = {{"type", "random_steps"}, {"intervals", 20}, {"interval_length", 10.0},
                           {"range", {-0.01, 0.19}}};
        base["disturbance"] = {{"type", "heaviside"},
                               {"pulses", json::array({
                                   {{"channel", 3}, {"t_on", 6.667}, {"level", -0.1}},
                                   {{"channel", 5}, {"t_on", 6.667}, {"level", 0.15}},
                               })}};
        base["times"] = {{"train_horizon", 200.0}, {"horizon", 40.0}, {"dt", 0.005},
                         {"settle", 50.0}, {"calibration", 40.0}};
        return base;
    }
    if (name == "fig7") {
        base["comment"] =
            "Neural-mass network, stationary regime, random-step training; step disturbances "
            "of 0.4 and -0.3 on pairs 1 and 3 between t=150 and t=400.";
        base["model"] = {{"preset", "wc4-stationary"}};
        base["forcing"] = {{"type", "random_steps"}, {"intervals", 12},
                           {"interval_length", 4000.0 / 12.0}, {"range", {-0.4, 0.6}}};
        base["disturbance"] = {{"type", "heaviside"},
                               {"pulses", json::array({
                                   {{"channel", 1}, {"t_on", 150.0}, {"t_off", 400.0}, {"level", 0.4}},
                                   {{"channel", 3}, {"t_on", 150.0}, {"t_off", 400.0}, {"level", -0.3}},
                               })}};
        base["times"] = {{"train_horizon", 4000.0}, {"horizon", 500.0}, {"dt", 0.2},
                         {"settle", 1000.0}, {"calibration", 500.0}};
        return base;
    }
    if (name == "fig8-leak0" || name == "fig8-leak65" || name == "fig8-leak95") {
        const double leak = name == "fig8-leak0" ? 0.0 : (name == "fig8-leak65" ? 0.65 : 0.95);
        base["comment"] =
            "Neural-mass network, oscillatory regime; composed-sigmoid disturbance on pair 1. "
            "Inference washout pinned to 500 steps so leak settings share the scoring window.";
        base["model"] = {{"preset", "wc4-oscillatory"}};
        base["forcing"] = {{"type", "random_steps"}, {"intervals", 12},
                           {"interval_length", 4000.0 / 12.0}, {"range", {-0.4, 0.6}}};
        base["disturbance"] = {{"type", "composed_sigmoid"}, {"channel", 1}};
        base["times"] = {{"train_horizon", 4000.0}, {"horizon", 450.0}, {"dt", 0.2},
                         {"settle", 1000.0}, {"calibration", 450.0}, {"washout_inference", 500}};
        base["detector"]["leak"] = leak;
        return base;
    }
    throw ConfigError("unknown experiment preset '" + name +
                      "' (available: fig3, fig4, fig7, fig8-leak0, fig8-leak65, fig8-leak95)");
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

struct ExperimentOutcome {
    json metrics;
    std::filesystem::path directory;
};

inline ExperimentOutcome run_experiment(const json& cfg_json, const std::filesystem::path& out_dir) {
    const ExperimentConfig cfg = parse_experiment_config(cfg_json);
    ModelBundle mb = build_model(cfg.model_spec);
    const NetworkModel& model = *mb.model;

    DetectorConfig dc;
    dc.architecture = cfg.architecture;
    dc.reservoir_size = cfg.reservoir_total > 0 ? cfg.reservoir_total / model.nodes()
                                                : cfg.reservoir_per_unit;
    dc.density = cfg.density;
    dc.spectral_radius = cfg.spectral_radius;
    dc.input_scale = cfg.input_scale;
    dc.leak = cfg.leak;
    dc.ridge_lambda = cfg.lambda;
    dc.washout = cfg.washout;
    dc.channel_map = mb.channel_map;
    dc.neighborhoods = mb.neighborhoods;
    dc.threads = cfg.threads;

    const int channels = mb.channel_map.channels();
    const Signal forcing = build_signal(cfg.forcing_spec, channels, mix_seed(cfg.seed, salts::kForcing));
    const Signal disturbance =
        build_signal(cfg.disturbance_spec, channels, mix_seed(cfg.seed, salts::kDisturbance));

    // Phase 1: observe the system under the known forcing and fit readouts.
    const Vec x0 = draw_initial_condition(model, mix_seed(cfg.seed, salts::kInitialCondition));
    const Trajectory training =
        simulate(model, expand(forcing, mb.channel_map), x0, 0.0, cfg.train_horizon, cfg.dt);
    TrainedDetector det = train_from(model, training, forcing, dc, cfg.seed);

    // Phase 2: reach the operating state, calibrate, then observe under the
    // unknown disturbance.
    Vec x0_inf = training.final_state();
    if (cfg.settled_start && cfg.settle > 0) {
        const Trajectory settled = simulate(model, Signal::zero(model.state_size()),
                                            training.final_state(), 0.0, cfg.settle, cfg.dt);
        x0_inf = settled.final_state();
    }
    calibrate_noise_floor(det, model, x0_inf, cfg.calibration, cfg.dt);

    const Trajectory observed =
        simulate(model, expand(disturbance, mb.channel_map), x0_inf, 0.0, cfg.horizon, cfg.dt);
    DetectionResult res = detect_on(det, observed, &disturbance, cfg.washout_inference);
    res.localized = localize(res, det, cfg.localization);
    const auto [mse_d, mse_u] = mse_report(res, res.true_disturbed);

    // Artifacts.
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "config.json", cfg.raw.dump(2) + "\n");
    write_trajectory_csv(out_dir / "training_trajectory.csv", training);
    write_trajectory_csv(out_dir / "inference_trajectory.csv", observed);

    std::vector<std::string> names;
    Mat series(2 * channels, res.samples());
    for (int c = 0; c < channels; ++c) {
        names.push_back("g" + std::to_string(c + 1) + "_true");
        names.push_back("g" + std::to_string(c + 1) + "_recovered");
        series.row(2 * c) = res.truth.row(c);
        series.row(2 * c + 1) = res.recovered.row(c);
    }
    write_series_csv(out_dir / "recovered_signals.csv", res.t0, res.dt, names, series);
    save_detector(det, out_dir / "detector");

    auto one_based = [](const std::vector<int>& v) {
        json a = json::array();
        for (int c : v) a.push_back(c + 1);
        return a;
    };
    json per_channel = json::array();
    for (int c = 0; c < channels; ++c) {
        json e = {{"channel", c + 1},
                  {"rms_recovered", res.recovered_rms[c]},
                  {"mse", res.per_channel_mse[c]},
                  {"noise_floor", det.noise_floor[c]}};
        const double rms_true =
            std::sqrt(res.truth.rightCols(res.retained()).row(c).array().square().mean());
        e["rms_true"] = rms_true;
        if (rms_true > 0) e["nrmse"] = std::sqrt(res.per_channel_mse[c]) / rms_true;
        per_channel.push_back(std::move(e));
    }
    json metrics = {
        {"channels", channels},
        {"per_channel", std::move(per_channel)},
        {"localized", one_based(res.localized)},
        {"true_disturbed", one_based(res.true_disturbed)},
        {"noise_floor", std::vector<double>(det.noise_floor.data(),
                                            det.noise_floor.data() + det.noise_floor.size())},
        {"inference_washout_steps", res.washout},
        {"training_washout_steps", det.manifest.at("washout")},
        {"min_state_training", training.min_value()},
        {"min_state_inference", observed.min_value()},
        {"mse_convention",
         "per-channel mean over retained steps of squared recovery error; aggregates average "
         "over the channels in each set"},
    };
    if (mse_d) metrics["mse_disturbed"] = *mse_d;
    if (mse_u) metrics["mse_undisturbed"] = *mse_u;
    write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");

    json manifest = {{"config", cfg.raw},
                     {"artifacts",
                      {"config.json", "training_trajectory.csv", "inference_trajectory.csv",
                       "recovered_signals.csv", "metrics.json", "detector"}},
                     {"forcing_realized", forcing.metadata()},
                     {"disturbance_realized", disturbance.metadata()},
                     {"metrics", metrics}};
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

    return {std::move(metrics), out_dir};
}

// ---------------------------------------------------------------------------
// Scaling study
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& scaling_config_keys() {
    static const std::vector<std::string> keys = {
        "comment", "seed", "sizes", "realizations", "reservoir_size", "architectures",
        "fraction_disturbed", "times", "forcing", "detector", "netgen", "threads"};
    return keys;
}

inline json scaling_study_preset() {
    return {
        {"comment",
         "Desk-scale architecture comparison on generated food webs: one monolithic reservoir "
         "of size N*M against N per-node reservoirs of size M. Equilibria are capped at 30 so "
         "reservoir inputs stay in the responsive range of tanh at input scale 0.01."},
        {"seed", 7},
        {"sizes", {5, 10, 20, 40}},
        {"realizations", 5},
        {"reservoir_size", 100},
        {"architectures", {"standard", "pseudo-parallel"}},
        {"fraction_disturbed", 0.2},
        {"times", {{"train_horizon", 100.0}, {"horizon", 100.0}, {"dt", 0.01}, {"settle", 100.0}}},
        {"forcing", {{"type", "sinusoid_bank"}, {"amplitude", 0.8}, {"freq_range", {1.0, 9.0}}}},
        {"detector",
         {{"spectral_radius", 1.2}, {"input_scale", 0.01}, {"leak", 0.0}, {"lambda", 1e-6}}},
        {"netgen", {{"x_min", 1.0}, {"x_max", 30.0}, {"retries", 20000}}},
        {"threads", 0},
    };
}

inline std::vector<std::string> validate_scaling_config(const json& cfg) {
    std::vector<std::string> errors;
    check_keys(cfg, scaling_config_keys(), "config", errors);
    if (!cfg.is_object()) return errors;
    for (const char* req : {"seed", "sizes", "realizations", "reservoir_size"})
        if (!cfg.contains(req)) errors.push_back(std::string("config: missing key '") + req + "'");
    if (cfg.contains("realizations") && cfg.at("realizations").get<int>() < 1)
        errors.push_back("config: realizations must be >= 1");
    if (cfg.contains("sizes"))
        for (const auto& n : cfg.at("sizes"))
            if (n.get<int>() < 5) errors.push_back("config: sizes must be >= 5");
    if (cfg.contains("fraction_disturbed")) {
        const double f = cfg.at("fraction_disturbed").get<double>();
        if (f < 0 || f > 1) errors.push_back("config: fraction_disturbed must lie in [0,1]");
    }
    if (cfg.contains("times")) {
        check_keys(cfg.at("times"), {"train_horizon", "horizon", "dt", "settle"}, "times", errors);
        if (cfg.at("times").contains("dt") && !(cfg.at("times").at("dt").get<double>() > 0))
            errors.push_back("times: dt must be positive");
    }
    if (cfg.contains("netgen"))
        check_keys(cfg.at("netgen"), {"x_min", "x_max", "retries"}, "netgen", errors);
    if (cfg.contains("detector"))
        check_keys(cfg.at("detector"),
                   {"spectral_radius", "input_scale", "leak", "lambda", "density"},
                   "detector", errors);
    return errors;
}

struct ScalingRow {
    int size = 0;
    int realization = 0;
    std::string architecture;
    double mse_disturbed = 0, mse_undisturbed = 0;
    bool ok = false;
    std::string error;
};

struct ScalingSummary {
    std::vector<ScalingRow> rows;
    json summary;
};

inline ScalingSummary run_scaling_study(const json& cfg_json, const std::filesystem::path& out_dir) {
    {
        const auto errors = validate_scaling_config(cfg_json);
        if (!errors.empty()) {
            std::string msg = "invalid scaling-study config:";
            for (const auto& e : errors) msg += "\n  - " + e;
            throw ConfigError(msg);
        }
    }
    const std::uint64_t master = cfg_json.at("seed").get<std::uint64_t>();
    const auto sizes = cfg_json.at("sizes").get<std::vector<int>>();
    const int realizations = cfg_json.at("realizations").get<int>();
    const int m_per_unit = cfg_json.at("reservoir_size").get<int>();
    std::vector<std::string> archs = {"standard", "pseudo-parallel"};
    if (cfg_json.contains("architectures")) archs = cfg_json.at("architectures").get<std::vector<std::string>>();
    const double fraction = cfg_json.value("fraction_disturbed", 0.2);
    const json times = cfg_json.value("times", json::object());
    const double t_hat = times.value("train_horizon", 100.0);
    const double horizon = times.value("horizon", 100.0);
    const double dt = times.value("dt", 0.01);
    const double settle = times.value("settle", 100.0);
    const json det_spec = cfg_json.value("detector", json::object());
    const json netgen_spec = cfg_json.value("netgen", json::object());
    NetgenOptions ng;
    ng.x_min = netgen_spec.value("x_min", 1.0);
    if (netgen_spec.contains("x_max") && !netgen_spec.at("x_max").is_null())
        ng.x_max = netgen_spec.at("x_max").get<double>();
    ng.max_retries = netgen_spec.value("retries", 1000);
    const int threads = cfg_json.value("threads", 1);

    struct Task { int size; int realization; };
    std::vector<Task> tasks;
    for (int n : sizes)
        for (int r = 0; r < realizations; ++r) tasks.push_back({n, r});

    std::vector<std::vector<ScalingRow>> results(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), threads, [&](int ti) {
        const auto [n, r] = tasks[static_cast<std::size_t>(ti)];
        const std::uint64_t seed =
            mix_seed(master, static_cast<std::uint64_t>(n) * 1000003ULL + static_cast<std::uint64_t>(r));
        auto& rows = results[static_cast<std::size_t>(ti)];
        try {
            const GeneratedSystem sys = generate_lv(n, mix_seed(seed, salts::kSystem), ng);
            LotkaVolterraModel model(sys.params);
            const ChannelMap map = ChannelMap::identity(n);
            const Signal forcing =
                sinusoid_bank(n, 0.8, 1.0, 9.0, mix_seed(seed, salts::kForcing));
            const Signal disturbance =
                random_disturbance_ensemble(n, fraction, mix_seed(seed, salts::kDisturbance));
            const Vec x0 = draw_initial_condition(model, mix_seed(seed, salts::kInitialCondition));
            const Trajectory training = simulate(model, expand(forcing, map), x0, 0.0, t_hat, dt);
            const Trajectory settled = simulate(model, Signal::zero(n), training.final_state(),
                                                0.0, settle, dt);
            const Trajectory observed = simulate(model, expand(disturbance, map),
                                                 settled.final_state(), 0.0, horizon, dt);
            for (const auto& arch : archs) {
                ScalingRow row;
                row.size = n;
                row.realization = r;
                row.architecture = arch;
                try {
                    DetectorConfig dc;
                    dc.architecture = architecture_from_string(arch);
                    dc.reservoir_size = m_per_unit;
                    dc.spectral_radius = det_spec.value("spectral_radius", 1.2);
                    dc.input_scale = det_spec.value("input_scale", 0.01);
                    dc.leak = det_spec.value("leak", 0.0);
                    dc.ridge_lambda = det_spec.value("lambda", 1e-6);
                    dc.density = det_spec.value("density", -1.0);
                    dc.channel_map = map;
                    dc.neighborhoods = lv_neighborhoods(sys.params);
                    dc.threads = 1;  // parallelism lives at the task level
                    TrainedDetector det = train_from(model, training, forcing, dc, seed);
                    DetectionResult res = detect_on(det, observed, &disturbance);
                    const auto [mse_d, mse_u] = mse_report(res, res.true_disturbed);
                    row.mse_disturbed = mse_d.value_or(0.0);
                    row.mse_undisturbed = mse_u.value_or(0.0);
                    row.ok = true;
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            }
        } catch (const std::exception& e) {
            for (const auto& arch : archs) {
                ScalingRow row;
                row.size = n;
                row.realization = r;
                row.architecture = arch;
                row.error = e.what();
                rows.push_back(row);
            }
        }
    });

    ScalingSummary out;
    for (auto& rs : results)
        for (auto& row : rs) out.rows.push_back(std::move(row));

    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "config.json", json(cfg_json).dump(2) + "\n");
    std::ostringstream csv;
    csv << "N,realization,architecture,mse_disturbed,mse_undisturbed,status\n";
    for (const auto& row : out.rows) {
        csv << row.size << "," << row.realization << "," << row.architecture << ",";
        if (row.ok)
            csv << format_full(row.mse_disturbed) << "," << format_full(row.mse_undisturbed) << ",ok\n";
        else
            csv << ",,failed\n";
    }
    write_text(out_dir / "results.csv", csv.str());

    json agg = json::array();
    for (int n : sizes) {
        for (const auto& arch : archs) {
            std::vector<double> md, mu;
            int failed = 0;
            for (const auto& row : out.rows) {
                if (row.size != n || row.architecture != arch) continue;
                if (row.ok) {
                    md.push_back(row.mse_disturbed);
                    mu.push_back(row.mse_undisturbed);
                } else {
                    ++failed;
                }
            }
            auto mean = [](const std::vector<double>& v) {
                return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            };
            auto median = [](std::vector<double> v) {
                if (v.empty()) return 0.0;
                std::sort(v.begin(), v.end());
                const std::size_t m = v.size() / 2;
                return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
            };
            agg.push_back({{"N", n},
                           {"architecture", arch},
                           {"realizations_ok", md.size()},
                           {"realizations_failed", failed},
                           {"mse_disturbed_mean", mean(md)},
                           {"mse_disturbed_median", median(md)},
                           {"mse_undisturbed_mean", mean(mu)},
                           {"mse_undisturbed_median", median(mu)}});
        }
    }
    json failures = json::array();
    for (const auto& row : out.rows)
        if (!row.ok)
            failures.push_back({{"N", row.size}, {"realization", row.realization},
                                {"architecture", row.architecture}, {"error", row.error}});
    out.summary = {{"aggregate", std::move(agg)}, {"failures", std::move(failures)},
                   {"aggregate_convention", "mean and median over realizations of the "
                                            "per-realization disturbed/undisturbed MSE"}};
    write_text(out_dir / "summary.json", out.summary.dump(2) + "\n");
    return out;
}

}  // namespace rcdetect
