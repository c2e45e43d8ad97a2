#pragma once

// Two-phase disturbance identification: train readouts on a known forcing,
// then reconstruct unknown disturbances from observed trajectories. Supports
// a single monolithic reservoir (size N*M) and a pseudo-parallel ensemble of
// N per-node reservoirs (size M each).

#include "rcdetect/common.hpp"
#include "rcdetect/matrixio.hpp"
#include "rcdetect/models.hpp"
#include "rcdetect/reservoir.hpp"
#include "rcdetect/signals.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>

namespace rcdetect {

enum class Architecture { standard, pseudo_parallel };

inline std::string to_string(Architecture a) {
    return a == Architecture::standard ? "standard" : "pseudo-parallel";
}
inline Architecture architecture_from_string(const std::string& s) {
    if (s == "standard") return Architecture::standard;
    if (s == "pseudo-parallel" || s == "pseudo_parallel") return Architecture::pseudo_parallel;
    throw ConfigError("unknown architecture '" + s + "' (expected standard|pseudo-parallel)");
}

/// Node neighborhoods as flat state-index slices: node i's slice covers its
/// own state plus the states of nodes j with P_ij != 0 or P_ji != 0.
inline std::vector<std::vector<int>> lv_neighborhoods(const LotkaVolterraParams& p) {
    const int n = p.size();
    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::set<int> s{i};
        for (int j = 0; j < n; ++j)
            if (j != i && (p.interaction(i, j) != 0.0 || p.interaction(j, i) != 0.0)) s.insert(j);
        nbrs[static_cast<std::size_t>(i)] = {s.begin(), s.end()};
    }
    return nbrs;
}

/// Pair j neighbors pair i when B_ij != 0 or B_ji != 0; both E_j and I_j
/// enter the slice.
inline std::vector<std::vector<int>> wc_neighborhoods(const WilsonCowanParams& p) {
    const int n = p.pairs;
    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::set<int> pairs{i};
        for (int j = 0; j < n; ++j)
            if (j != i && (p.adjacency(i, j) != 0.0 || p.adjacency(j, i) != 0.0)) pairs.insert(j);
        for (int j : pairs) {
            nbrs[static_cast<std::size_t>(i)].push_back(2 * j);
            nbrs[static_cast<std::size_t>(i)].push_back(2 * j + 1);
        }
        std::sort(nbrs[static_cast<std::size_t>(i)].begin(), nbrs[static_cast<std::size_t>(i)].end());
    }
    return nbrs;
}

inline std::vector<std::vector<int>> model_neighborhoods(const NetworkModel& model) {
    if (const auto* lv = dynamic_cast<const LotkaVolterraModel*>(&model))
        return lv_neighborhoods(lv->params());
    if (const auto* wc = dynamic_cast<const WilsonCowanModel*>(&model))
        return wc_neighborhoods(wc->params());
    throw Error("model_neighborhoods: no neighborhood rule for model " + model.name());
}

struct DetectorConfig {
    Architecture architecture = Architecture::standard;
    int reservoir_size = 1000;      // M per unit; the standard reservoir has N*M nodes
    double density = -1.0;          // per-entry probability; <0 means 6/(reservoir size)
    double spectral_radius = 1.2;
    double input_scale = 0.01;
    double leak = 0.0;
    double ridge_lambda = 1e-6;
    int washout = -1;               // training washout; <0 selects the default policy
    ChannelMap channel_map;
    std::vector<std::vector<int>> neighborhoods;  // per node, state indices (pseudo-parallel)
    std::map<int, std::uint64_t> node_seed_overrides;
    int threads = 1;

    void validate(int state_size, int dim_per_node) const {
        require(reservoir_size >= 1, "DetectorConfig: reservoir size must be >= 1");
        require(channel_map.state_size == state_size,
                "DetectorConfig: channel map width does not match the model");
        for (int s : channel_map.state_index)
            require(s >= 0 && s < state_size, "DetectorConfig: channel map index out of range");
        if (architecture == Architecture::pseudo_parallel) {
            require(static_cast<int>(neighborhoods.size()) * dim_per_node == state_size,
                    "DetectorConfig: one neighborhood per node required");
            for (const auto& nb : neighborhoods)
                for (int s : nb) require(s >= 0 && s < state_size,
                                         "DetectorConfig: neighborhood index out of range");
        }
    }
};

/// One reservoir+readout unit. The standard architecture has a single unit
/// fed by the full state; pseudo-parallel has one per node, fed by the node's
/// neighborhood slice and trained only on that node's channels.
struct DetectorUnit {
    Reservoir reservoir;
    Readout readout;
    std::vector<int> input_indices;   // rows of the trajectory fed to this unit
    std::vector<int> channels;        // signal channels this unit outputs (0-based)
    std::uint64_t seed = 0;
};

struct TrainedDetector {
    DetectorConfig config;
    std::vector<DetectorUnit> units;
    int model_state_size = 0;
    double train_dt = 0.0;
    double train_horizon = 0.0;
    Vec noise_floor;                  // per channel; empty until calibrated
    json manifest;

    int channels() const { return config.channel_map.channels(); }
};

namespace detail {

inline Mat slice_rows(const Mat& m, const std::vector<int>& rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    return out;
}

inline Trajectory slice_trajectory(const Trajectory& traj, const std::vector<int>& rows) {
    Trajectory out;
    out.t0 = traj.t0;
    out.dt = traj.dt;
    out.states = slice_rows(traj.states, rows);
    return out;
}

/// Evaluates a signal on the trajectory's time grid: channels x samples.
inline Mat sample_signal(const Signal& sig, const Trajectory& traj) {
    Mat out(sig.channels(), traj.samples());
    Vec v(sig.channels());
    for (int k = 0; k < traj.samples(); ++k) {
        sig.eval_into(traj.time_at(k), v);
        out.col(k) = v;
    }
    return out;
}

constexpr std::uint64_t kUnitSalt = 0xD37EC7ULL;

}  // namespace detail

/// Trains readouts against the forcing on an already-observed trajectory.
/// Pseudo-parallel units are trained independently (and in parallel) with
/// per-node seeds mix(seed, unit), so retraining one node cannot move any
/// other node's draws.
inline TrainedDetector train_from(const NetworkModel& model, const Trajectory& observed,
                                  const Signal& forcing, const DetectorConfig& config,
                                  std::uint64_t seed) {
    config.validate(model.state_size(), model.dim_per_node());
    require(forcing.channels() == config.channel_map.channels(),
            "train: forcing channel count does not match the detector channel map");
    require(static_cast<int>(observed.states.rows()) == model.state_size(),
            "train: trajectory dimension does not match the model");

    std::vector<std::string> warnings;
    for (int c = 0; c < forcing.channels(); ++c) {
        const auto& sup = forcing.support();
        if (!std::binary_search(sup.begin(), sup.end(), c)) {
            warnings.push_back("training channel " + std::to_string(c + 1) +
                               " is identically zero; disturbances at that node cannot be recovered");
        }
    }
    for (const auto& w : warnings) std::cerr << "train: warning: " << w << "\n";

    TrainedDetector det;
    det.config = config;
    det.model_state_size = model.state_size();
    det.train_dt = observed.dt;
    det.train_horizon = observed.dt * observed.steps();

    const Mat targets = detail::sample_signal(forcing, observed);
    const int n_samples = observed.samples();
    const int washout = config.washout >= 0 ? std::min(config.washout, n_samples)
                                            : default_washout(n_samples, config.leak);

    if (config.architecture == Architecture::standard) {
        DetectorUnit unit;
        unit.seed = mix_seed(seed, detail::kUnitSalt);
        unit.input_indices.resize(static_cast<std::size_t>(model.state_size()));
        for (int i = 0; i < model.state_size(); ++i) unit.input_indices[static_cast<std::size_t>(i)] = i;
        unit.channels.resize(static_cast<std::size_t>(forcing.channels()));
        for (int c = 0; c < forcing.channels(); ++c) unit.channels[static_cast<std::size_t>(c)] = c;

        ReservoirOptions opts;
        opts.size = config.reservoir_size * model.nodes();
        opts.input_dim = model.state_size();
        opts.density = config.density;
        opts.spectral_radius = config.spectral_radius;
        opts.input_scale = config.input_scale;
        opts.leak = config.leak;
        unit.reservoir = build_reservoir(opts, unit.seed);

        StateHistory hist = drive(unit.reservoir, observed, washout);
        unit.readout = train_readout(hist, targets, config.ridge_lambda);
        det.units.push_back(std::move(unit));
    } else {
        const int n_nodes = model.nodes();
        const int dim = model.dim_per_node();
        det.units.resize(static_cast<std::size_t>(n_nodes));
        parallel_for(n_nodes, config.threads, [&](int i) {
            DetectorUnit unit;
            const auto ov = config.node_seed_overrides.find(i);
            unit.seed = ov != config.node_seed_overrides.end()
                            ? ov->second
                            : mix_seed(seed, detail::kUnitSalt + static_cast<std::uint64_t>(i));
            unit.input_indices = config.neighborhoods[static_cast<std::size_t>(i)];
            for (int c = 0; c < config.channel_map.channels(); ++c)
                if (config.channel_map.node_of(c, dim) == i) unit.channels.push_back(c);

            ReservoirOptions opts;
            opts.size = config.reservoir_size;
            opts.input_dim = static_cast<int>(unit.input_indices.size());
            opts.density = config.density;
            opts.spectral_radius = config.spectral_radius;
            opts.input_scale = config.input_scale;
            opts.leak = config.leak;
            unit.reservoir = build_reservoir(opts, unit.seed);

            const Trajectory local = detail::slice_trajectory(observed, unit.input_indices);
            StateHistory hist = drive(unit.reservoir, local, washout);
            if (!unit.channels.empty()) {
                std::vector<int> rows(unit.channels.begin(), unit.channels.end());
                unit.readout = train_readout(hist, detail::slice_rows(targets, rows),
                                             config.ridge_lambda);
            } else {
                unit.readout.output = Mat::Zero(0, config.reservoir_size);
                unit.readout.lambda = config.ridge_lambda;
                unit.readout.washout = hist.washout;
            }
            det.units[static_cast<std::size_t>(i)] = std::move(unit);
        });
    }

    json units = json::array();
    for (const auto& u : det.units) {
        json ju = {{"seed", u.seed}, {"inputs", json::array()}, {"channels", json::array()}};
        for (int s : u.input_indices) ju["inputs"].push_back(s + 1);
        for (int c : u.channels) ju["channels"].push_back(c + 1);
        units.push_back(std::move(ju));
    }
    det.manifest = {{"type", "trained_detector"},
                    {"architecture", to_string(config.architecture)},
                    {"reservoir_size", config.reservoir_size},
                    {"density", config.density},
                    {"spectral_radius", config.spectral_radius},
                    {"input_scale", config.input_scale},
                    {"leak", config.leak},
                    {"ridge_lambda", config.ridge_lambda},
                    {"seed", seed},
                    {"washout", washout},
                    {"train_horizon", det.train_horizon},
                    {"train_dt", det.train_dt},
                    {"channel_map", config.channel_map.to_json()},
                    {"model", model.describe()},
                    {"forcing", forcing.metadata()},
                    {"warnings", warnings},
                    {"units", std::move(units)}};
    return det;
}

/// Simulates the training system under the known forcing on [0, T_hat] and
/// trains on the observed trajectory.
inline TrainedDetector train(const NetworkModel& model, const Signal& forcing,
                             const DetectorConfig& config, double t_hat, double dt,
                             std::uint64_t seed, const Vec& x0) {
    const Trajectory traj =
        simulate(model, expand(forcing, config.channel_map), x0, 0.0, t_hat, dt);
    return train_from(model, traj, forcing, config, seed);
}

struct DetectionResult {
    double t0 = 0.0;
    double dt = 0.0;
    int washout = 0;                 // leading samples flagged as transient
    Mat recovered;                   // channels x samples
    Mat truth;                       // channels x samples; empty without ground truth
    bool has_truth = false;
    Vec recovered_rms;               // per channel, over retained samples
    Vec per_channel_mse;             // per channel, over retained samples
    std::vector<int> true_disturbed; // support of the ground-truth signal (0-based)
    std::optional<double> mse_disturbed;
    std::optional<double> mse_undisturbed;
    std::vector<int> localized;      // 0-based; filled by localize()

    int samples() const { return static_cast<int>(recovered.cols()); }
    int retained() const { return samples() - washout; }
};

/// Applies the trained readouts to an observed trajectory. Reservoir states
/// are restarted from zero; the first `washout` outputs are emitted but
/// flagged and excluded from RMS/MSE.
inline DetectionResult detect_on(const TrainedDetector& det, const Trajectory& observed,
                                 const Signal* truth, int washout_override = -1) {
    require(static_cast<int>(observed.states.rows()) == det.model_state_size,
            "detect: trajectory dimension does not match the trained detector");
    if (truth)
        require(truth->channels() == det.channels(),
                "detect: ground-truth channel count does not match the detector");

    const int n_samples = observed.samples();
    const int washout = washout_override >= 0 ? std::min(washout_override, n_samples)
                                              : default_washout(n_samples, det.config.leak);

    DetectionResult res;
    res.t0 = observed.t0;
    res.dt = observed.dt;
    res.washout = washout;
    res.recovered.resize(det.channels(), n_samples);

    std::vector<const DetectorUnit*> units;
    for (const auto& u : det.units) units.push_back(&u);
    parallel_for(static_cast<int>(units.size()), det.config.threads, [&](int k) {
        const DetectorUnit& unit = *units[static_cast<std::size_t>(k)];
        if (unit.channels.empty()) return;
        Reservoir reservoir = unit.reservoir;  // local copy: detect never mutates the detector
        reservoir.reset();
        const Trajectory local = detail::slice_trajectory(observed, unit.input_indices);
        StateHistory hist = drive(reservoir, local, washout);
        const Mat u_out = readout_apply(unit.readout, hist);
        for (std::size_t c = 0; c < unit.channels.size(); ++c)
            res.recovered.row(unit.channels[c]) = u_out.row(static_cast<Eigen::Index>(c));
    });

    const int kept = res.retained();
    require(kept > 0, "detect: washout leaves no retained samples");
    res.recovered_rms = (res.recovered.rightCols(kept).array().square().rowwise().mean()).sqrt();

    if (truth) {
        res.has_truth = true;
        res.truth = detail::sample_signal(*truth, observed);
        res.true_disturbed = truth->support();
        const Mat err = res.recovered.rightCols(kept) - res.truth.rightCols(kept);
        res.per_channel_mse = err.array().square().rowwise().mean();
        std::vector<int> undisturbed;
        for (int c = 0; c < det.channels(); ++c)
            if (!std::binary_search(res.true_disturbed.begin(), res.true_disturbed.end(), c))
                undisturbed.push_back(c);
        if (!res.true_disturbed.empty()) {
            double acc = 0;
            for (int c : res.true_disturbed) acc += res.per_channel_mse[c];
            res.mse_disturbed = acc / static_cast<double>(res.true_disturbed.size());
        }
        if (!undisturbed.empty()) {
            double acc = 0;
            for (int c : undisturbed) acc += res.per_channel_mse[c];
            res.mse_undisturbed = acc / static_cast<double>(undisturbed.size());
        }
    }
    return res;
}

/// Simulates the disturbed system on [0, T] under `unknown` and runs
/// detection on the resulting observation. dt and model dimensions must match
/// the training manifest.
inline DetectionResult detect(const TrainedDetector& det, const NetworkModel& model,
                              const Signal* unknown, const Vec& x0, double horizon, double dt,
                              int washout_override = -1) {
    if (std::abs(dt - det.train_dt) > 1e-12 * std::max(1.0, std::abs(det.train_dt)))
        throw Error("detect: dt=" + std::to_string(dt) + " does not match the training dt=" +
                    std::to_string(det.train_dt));
    if (model.state_size() != det.model_state_size)
        throw Error("detect: model dimension does not match the training manifest");
    const Signal zero = Signal::zero(det.channels());
    const Signal& g = unknown ? *unknown : zero;
    const Trajectory traj =
        simulate(model, expand(g, det.config.channel_map), x0, 0.0, horizon, dt);
    return detect_on(det, traj, unknown, washout_override);
}

/// Flags channel i as disturbed when RMS(u_i) exceeds
/// kappa * max(noise_floor_i, quantile_q(all-channel RMS)). The in-situ
/// quantile term guards against disturbance-induced cross-talk, which a G=0
/// calibration run cannot see; it assumes fewer than (1-q)-fraction of
/// channels are disturbed. Set use_quantile=false for the floor-only rule.
struct ThresholdPolicy {
    double kappa = 3.0;
    double quantile = 0.25;
    bool use_quantile = true;
};

inline std::vector<int> localize(const DetectionResult& res, const Vec& noise_floor,
                                 const ThresholdPolicy& policy = {}) {
    const int n = static_cast<int>(res.recovered_rms.size());
    double q = 0.0;
    if (policy.use_quantile && n > 0) {
        std::vector<double> rms(res.recovered_rms.data(), res.recovered_rms.data() + n);
        std::sort(rms.begin(), rms.end());
        const double pos = policy.quantile * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, rms.size() - 1);
        q = rms[lo] + (pos - static_cast<double>(lo)) * (rms[hi] - rms[lo]);
    }
    std::vector<int> out;
    for (int c = 0; c < n; ++c) {
        const double floor_c = noise_floor.size() == n ? noise_floor[c] : 0.0;
        if (res.recovered_rms[c] > policy.kappa * std::max(floor_c, q)) out.push_back(c);
    }
    return out;
}

inline std::vector<int> localize(const DetectionResult& res, const TrainedDetector& det,
                                 const ThresholdPolicy& policy = {}) {
    return localize(res, det.noise_floor, policy);
}

/// Disturbed/undisturbed aggregate MSE over the given channel split; an empty
/// side is reported as absent rather than zero.
inline std::pair<std::optional<double>, std::optional<double>> mse_report(
    const DetectionResult& res, const std::vector<int>& disturbed) {
    require(res.has_truth, "mse_report: ground truth unavailable");
    std::optional<double> d, u;
    double acc_d = 0, acc_u = 0;
    int n_d = 0, n_u = 0;
    for (int c = 0; c < static_cast<int>(res.per_channel_mse.size()); ++c) {
        if (std::find(disturbed.begin(), disturbed.end(), c) != disturbed.end()) {
            acc_d += res.per_channel_mse[c];
            ++n_d;
        } else {
            acc_u += res.per_channel_mse[c];
            ++n_u;
        }
    }
    if (n_d) d = acc_d / n_d;
    if (n_u) u = acc_u / n_u;
    return {d, u};
}

/// Runs detection with G = 0 from the given state and stores the per-channel
/// RMS of the spurious output as the detector's noise floor.
inline Vec calibrate_noise_floor(TrainedDetector& det, const NetworkModel& model, const Vec& x0,
                                 double t_cal, double dt) {
    const DetectionResult res = detect(det, model, nullptr, x0, t_cal, dt);
    det.noise_floor = res.recovered_rms;
    det.manifest["noise_floor"] =
        std::vector<double>(det.noise_floor.data(), det.noise_floor.data() + det.noise_floor.size());
    return det.noise_floor;
}

// ---------------------------------------------------------------------------
// Persistence: manifest JSON + one blob pair per unit.
// ---------------------------------------------------------------------------

inline void save_detector(const TrainedDetector& det, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "detector.json", det.manifest.dump(2) + "\n");
    for (std::size_t k = 0; k < det.units.size(); ++k) {
        const auto& u = det.units[k];
        const std::string stem = "unit" + std::to_string(k);
        write_sparse(dir / (stem + "_internal.bin"), u.reservoir.internal);
        write_matrix(dir / (stem + "_input.bin"), u.reservoir.input);
        write_matrix(dir / (stem + "_readout.bin"), u.readout.output);
    }
}

inline TrainedDetector load_detector(const std::filesystem::path& dir) {
    const json manifest = json::parse(read_text(dir / "detector.json"));
    TrainedDetector det;
    det.manifest = manifest;
    det.config.architecture = architecture_from_string(manifest.at("architecture").get<std::string>());
    det.config.reservoir_size = manifest.at("reservoir_size").get<int>();
    det.config.density = manifest.at("density").get<double>();
    det.config.spectral_radius = manifest.at("spectral_radius").get<double>();
    det.config.input_scale = manifest.at("input_scale").get<double>();
    det.config.leak = manifest.at("leak").get<double>();
    det.config.ridge_lambda = manifest.at("ridge_lambda").get<double>();
    det.config.washout = manifest.at("washout").get<int>();
    det.config.channel_map = ChannelMap::from_json(manifest.at("channel_map"));
    det.model_state_size = det.config.channel_map.state_size;
    det.train_dt = manifest.at("train_dt").get<double>();
    det.train_horizon = manifest.at("train_horizon").get<double>();
    if (manifest.contains("noise_floor")) {
        const auto nf = manifest.at("noise_floor").get<std::vector<double>>();
        det.noise_floor = Eigen::Map<const Vec>(nf.data(), static_cast<Eigen::Index>(nf.size()));
    }
    const auto& units = manifest.at("units");
    for (std::size_t k = 0; k < units.size(); ++k) {
        DetectorUnit u;
        u.seed = units[k].at("seed").get<std::uint64_t>();
        for (const auto& s : units[k].at("inputs")) u.input_indices.push_back(s.get<int>() - 1);
        for (const auto& c : units[k].at("channels")) u.channels.push_back(c.get<int>() - 1);
        const std::string stem = "unit" + std::to_string(k);
        u.reservoir.internal = read_sparse(dir / (stem + "_internal.bin"));
        u.reservoir.input = read_matrix(dir / (stem + "_input.bin"));
        u.reservoir.size = static_cast<int>(u.reservoir.internal.rows());
        u.reservoir.input_dim = static_cast<int>(u.reservoir.input.cols());
        u.reservoir.leak = det.config.leak;
        u.reservoir.state = Vec::Zero(u.reservoir.size);
        u.readout.output = read_matrix(dir / (stem + "_readout.bin"));
        u.readout.lambda = det.config.ridge_lambda;
        u.readout.washout = det.config.washout;
        det.units.push_back(std::move(u));
        if (det.units.back().input_indices.size() > 0 && det.config.architecture == Architecture::pseudo_parallel)
            det.config.neighborhoods.push_back(det.units.back().input_indices);
    }
    return det;
}

}  // namespace rcdetect
