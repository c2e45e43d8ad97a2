#pragma once

// Network-coupled dynamical systems (generalized Lotka-Volterra food web and
// Wilson-Cowan neural masses), the forced-model interface and the fixed-step
// Heun integrator.

#include "rcdetect/common.hpp"
#include "rcdetect/signals.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace rcdetect {

/// Uniformly sampled state sequence; column k holds the flat state at
/// t0 + k*dt.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    Mat states;  // state_size x (steps+1)

    int steps() const { return states.cols() > 0 ? static_cast<int>(states.cols()) - 1 : 0; }
    int samples() const { return static_cast<int>(states.cols()); }
    double time_at(int k) const { return t0 + k * dt; }
    double min_value() const { return states.size() ? states.minCoeff() : 0.0; }
    Vec final_state() const { return states.col(states.cols() - 1); }
};

/// A simulatable N-node system with D-dimensional node states and an external
/// signal slot. With G = 0 the field reduces to the intrinsic dynamics.
class NetworkModel {
public:
    virtual ~NetworkModel() = default;

    virtual int nodes() const = 0;
    virtual int dim_per_node() const = 0;
    int state_size() const { return nodes() * dim_per_node(); }

    virtual void vector_field(double t, const Vec& state, const Vec& external, Vec& out) const = 0;
    Vec vector_field(double t, const Vec& state, const Vec& external) const {
        Vec out(state.size());
        vector_field(t, state, external, out);
        return out;
    }

    /// Per-step invariant hook; implementations throw on violation.
    virtual void check_state(const Vec& /*state*/, std::size_t /*step*/) const {}

    virtual std::string name() const = 0;
    virtual json describe() const = 0;
};

// ---------------------------------------------------------------------------
// Generalized Lotka-Volterra
// ---------------------------------------------------------------------------

struct LotkaVolterraParams {
    Vec growth;        // e_i
    Vec capacity;      // K_i
    Mat interaction;   // P_ij; P_ij = 0 means no direct interaction

    int size() const { return static_cast<int>(growth.size()); }
    void validate() const {
        require(capacity.size() == growth.size() && interaction.rows() == growth.size() &&
                    interaction.cols() == growth.size(),
                "LotkaVolterraParams: inconsistent dimensions");
        require((capacity.array() > 0).all(), "LotkaVolterraParams: capacities must be positive");
    }
    json to_json() const {
        json p = json::array();
        for (int i = 0; i < size(); ++i) {
            for (int j = 0; j < size(); ++j) {
                if (interaction(i, j) != 0.0) p.push_back({i + 1, j + 1, interaction(i, j)});
            }
        }
        return {{"type", "lotka_volterra"},
                {"growth", std::vector<double>(growth.data(), growth.data() + growth.size())},
                {"capacity", std::vector<double>(capacity.data(), capacity.data() + capacity.size())},
                {"interaction_triplets", std::move(p)}};
    }
    static LotkaVolterraParams from_json(const json& j) {
        LotkaVolterraParams p;
        const auto e = j.at("growth").get<std::vector<double>>();
        const auto K = j.at("capacity").get<std::vector<double>>();
        p.growth = Eigen::Map<const Vec>(e.data(), static_cast<Eigen::Index>(e.size()));
        p.capacity = Eigen::Map<const Vec>(K.data(), static_cast<Eigen::Index>(K.size()));
        p.interaction = Mat::Zero(p.size(), p.size());
        for (const auto& t : j.at("interaction_triplets"))
            p.interaction(t.at(0).get<int>() - 1, t.at(1).get<int>() - 1) = t.at(2).get<double>();
        p.validate();
        return p;
    }
};

/// dx_i/dt = x_i (e_i - x_i/K_i + sum_j P_ij x_j) + g_i(t); the external
/// signal enters additively.
inline void lv_vector_field(const LotkaVolterraParams& p, double /*t*/, const Vec& x, const Vec& g,
                            Vec& out) {
    require(x.size() == p.size() && g.size() == p.size(),
            "lv_vector_field: state/signal dimension mismatch with parameters");
    out = x.array() * (p.growth.array() - x.array() / p.capacity.array() +
                       (p.interaction * x).array()) +
          g.array();
}
inline Vec lv_vector_field(const LotkaVolterraParams& p, double t, const Vec& x, const Vec& g) {
    Vec out(x.size());
    lv_vector_field(p, t, x, g, out);
    return out;
}

/// Jacobian of the intrinsic (G=0) Lotka-Volterra field at an arbitrary state:
/// J_ij = delta_ij (e_i - 2 x_i/K_i + sum_k P_ik x_k) + x_i P_ij  (j != i term
/// folds in through the product rule).
inline Mat lv_jacobian(const LotkaVolterraParams& p, const Vec& x) {
    Mat J = x.asDiagonal() * p.interaction;
    const Vec bracket = p.growth.array() - 2.0 * x.array() / p.capacity.array() +
                        (p.interaction * x).array();
    J.diagonal() += bracket;
    return J;
}

class LotkaVolterraModel : public NetworkModel {
public:
    explicit LotkaVolterraModel(LotkaVolterraParams params) : p_(std::move(params)) { p_.validate(); }

    int nodes() const override { return p_.size(); }
    int dim_per_node() const override { return 1; }
    void vector_field(double t, const Vec& x, const Vec& g, Vec& out) const override {
        lv_vector_field(p_, t, x, g, out);
    }
    std::string name() const override { return "lotka_volterra"; }
    json describe() const override { return p_.to_json(); }
    const LotkaVolterraParams& params() const { return p_; }

private:
    LotkaVolterraParams p_;
};

// ---------------------------------------------------------------------------
// Wilson-Cowan
// ---------------------------------------------------------------------------

/// Saturating response K x^2 / (sigma^2 + x^2); range [0, K) for finite x.
inline double sigmoid(double x, double k_sig, double sigma) {
    return k_sig * x * x / (sigma * sigma + x * x);
}

struct WilsonCowanParams {
    int pairs = 0;
    double tau = 10.0;
    double w_ee = 6.4, w_ei = 6.0, w_ie = 4.8, w_ii = 1.2;
    double w_net = 0.5;
    double k_sig = 1.0, sigma = 1.0;
    Vec stimulus;    // P_i, length pairs
    Mat adjacency;   // B, pairs x pairs, zero diagonal

    void validate() const {
        require(pairs >= 1, "WilsonCowanParams: need at least one pair");
        require(stimulus.size() == pairs, "WilsonCowanParams: stimulus length mismatch");
        require(adjacency.rows() == pairs && adjacency.cols() == pairs,
                "WilsonCowanParams: adjacency shape mismatch");
        require(w_ee > 0 && w_ei > 0 && w_ie > 0 && w_ii > 0,
                "WilsonCowanParams: intra-pair couplings must be positive");
        require(sigma != 0.0, "WilsonCowanParams: sigma must be nonzero");
        for (int i = 0; i < pairs; ++i)
            require(adjacency(i, i) == 0.0, "WilsonCowanParams: adjacency diagonal must be zero");
    }
    json to_json() const {
        json B = json::array();
        for (int i = 0; i < pairs; ++i) {
            json row = json::array();
            for (int j = 0; j < pairs; ++j) row.push_back(adjacency(i, j));
            B.push_back(std::move(row));
        }
        return {{"type", "wilson_cowan"}, {"pairs", pairs}, {"tau", tau},
                {"w_ee", w_ee}, {"w_ei", w_ei}, {"w_ie", w_ie}, {"w_ii", w_ii},
                {"w_net", w_net}, {"k_sig", k_sig}, {"sigma", sigma},
                {"stimulus", std::vector<double>(stimulus.data(), stimulus.data() + stimulus.size())},
                {"adjacency", std::move(B)}};
    }
    static WilsonCowanParams from_json(const json& j) {
        WilsonCowanParams p;
        p.pairs = j.at("pairs").get<int>();
        p.tau = j.at("tau").get<double>();
        p.w_ee = j.at("w_ee").get<double>();
        p.w_ei = j.at("w_ei").get<double>();
        p.w_ie = j.at("w_ie").get<double>();
        p.w_ii = j.at("w_ii").get<double>();
        p.w_net = j.at("w_net").get<double>();
        p.k_sig = j.at("k_sig").get<double>();
        p.sigma = j.at("sigma").get<double>();
        const auto st = j.at("stimulus").get<std::vector<double>>();
        p.stimulus = Eigen::Map<const Vec>(st.data(), static_cast<Eigen::Index>(st.size()));
        p.adjacency = Mat::Zero(p.pairs, p.pairs);
        for (int i = 0; i < p.pairs; ++i)
            for (int jj = 0; jj < p.pairs; ++jj) p.adjacency(i, jj) = j.at("adjacency")[i][jj].get<double>();
        p.validate();
        return p;
    }
};

/// State interleaved as [E_1, I_1, ..., E_n, I_n]. External signals act only
/// on E slots, inside the response function; a nonzero I-slot entry violates
/// the disturbance model and is rejected.
inline void wc_vector_field(const WilsonCowanParams& p, double /*t*/, const Vec& x, const Vec& g,
                            Vec& out) {
    const int n = p.pairs;
    require(x.size() == 2 * n && g.size() == 2 * n,
            "wc_vector_field: state/signal dimension mismatch with parameters");
    for (int i = 0; i < n; ++i)
        require(g[2 * i + 1] == 0.0,
                "wc_vector_field: external signal on an inhibitory slot violates the disturbance model");
    out.resize(2 * n);
    for (int i = 0; i < n; ++i) {
        const double E = x[2 * i];
        const double I = x[2 * i + 1];
        double net = 0.0;
        for (int j = 0; j < n; ++j) net += p.adjacency(i, j) * x[2 * j + 1];
        const double argE = p.w_ee * E - p.w_ei * I + p.stimulus[i] - p.w_net * net + g[2 * i];
        const double argI = p.w_ie * E - p.w_ii * I;
        out[2 * i] = (-E + sigmoid(argE, p.k_sig, p.sigma)) / p.tau;
        out[2 * i + 1] = (-I + sigmoid(argI, p.k_sig, p.sigma)) / p.tau;
    }
}
inline Vec wc_vector_field(const WilsonCowanParams& p, double t, const Vec& x, const Vec& g) {
    Vec out;
    wc_vector_field(p, t, x, g, out);
    return out;
}

class WilsonCowanModel : public NetworkModel {
public:
    explicit WilsonCowanModel(WilsonCowanParams params) : p_(std::move(params)) { p_.validate(); }

    int nodes() const override { return p_.pairs; }
    int dim_per_node() const override { return 2; }
    void vector_field(double t, const Vec& x, const Vec& g, Vec& out) const override {
        wc_vector_field(p_, t, x, g, out);
    }
    /// Since the response lies in [0, K), trajectories started in [0, K] must
    /// stay inside [-K, 2K]; checked on every simulated step.
    void check_state(const Vec& x, std::size_t step) const override {
        const double lo = -p_.k_sig - 1e-9, hi = 2.0 * p_.k_sig + 1e-9;
        if ((x.array() < lo).any() || (x.array() > hi).any())
            throw Error("wilson_cowan: state left [-K, 2K] at step " + std::to_string(step));
    }
    std::string name() const override { return "wilson_cowan"; }
    json describe() const override { return p_.to_json(); }
    const WilsonCowanParams& params() const { return p_; }

private:
    WilsonCowanParams p_;
};

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// 8-species food web with three trophic levels; 9 predator-prey edges, each
/// with opposite-sign interaction entries. Growth rates are derived from the
/// designed coexistence equilibrium x* = [1.8,1.6,2.2,2.0,2.4,3.0,2.8,3.2],
/// which is linearly stable (Jacobian spectrum near -1.5).
inline LotkaVolterraParams lv8_preset() {
    const int n = 8;
    struct Edge { int pred, prey; double gain, loss; };
    // top predators {1,2}; mid-level {3,4,5}; basal {6,7,8} (1-based)
    const Edge edges[] = {
        {0, 2, 0.25, 0.45}, {0, 3, 0.22, 0.40}, {1, 3, 0.28, 0.48}, {1, 4, 0.24, 0.42},
        {2, 5, 0.30, 0.50}, {2, 6, 0.26, 0.44}, {3, 6, 0.24, 0.46}, {4, 6, 0.27, 0.42},
        {4, 7, 0.23, 0.41},
    };
    LotkaVolterraParams p;
    p.interaction = Mat::Zero(n, n);
    for (const auto& e : edges) {
        p.interaction(e.pred, e.prey) = e.gain;
        p.interaction(e.prey, e.pred) = -e.loss;
    }
    p.capacity = Vec(n);
    p.capacity << 1.0, 1.0, 1.5, 1.5, 1.5, 2.0, 2.0, 2.0;
    Vec xstar(n);
    xstar << 1.8, 1.6, 2.2, 2.0, 2.4, 3.0, 2.8, 3.2;
    p.growth = (xstar.array() / p.capacity.array()).matrix() - p.interaction * xstar;
    return p;
}
inline Vec lv8_equilibrium() {
    Vec xstar(8);
    xstar << 1.8, 1.6, 2.2, 2.0, 2.4, 3.0, 2.8, 3.2;
    return xstar;
}

/// Four Wilson-Cowan pairs on a directed ring (pair i receives network
/// inhibition from pair i+1 mod 4). The larger stimulus vector yields a
/// stationary state, the smaller one sustained oscillations.
inline WilsonCowanParams wc4_preset(bool stationary) {
    WilsonCowanParams p;
    p.pairs = 4;
    p.stimulus = Vec(4);
    if (stationary)
        p.stimulus << 3.22, 3.02, 3.18, 3.33;
    else
        p.stimulus << 1.52, 1.61, 1.57, 1.64;
    p.adjacency = Mat::Zero(4, 4);
    for (int i = 0; i < 4; ++i) p.adjacency(i, (i + 1) % 4) = 1.0;
    return p;
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// One Heun (explicit trapezoid) step: predictor with the field at t, then
/// average with the field at t+dt evaluated on the predictor state.
inline Vec heun_step(const NetworkModel& model, double t, const Vec& x, const Vec& g_t,
                     const Vec& g_next, double dt, std::size_t step_index = 0) {
    require(dt > 0, "heun_step: dt must be positive");
    Vec f0(x.size()), f1(x.size());
    model.vector_field(t, x, g_t, f0);
    const Vec predictor = x + dt * f0;
    model.vector_field(t + dt, predictor, g_next, f1);
    Vec next = x + 0.5 * dt * (f0 + f1);
    if (!next.allFinite())
        throw IntegrationDivergence(step_index,
                                    model.name() + ": non-finite state at step " +
                                        std::to_string(step_index) + " (t=" + std::to_string(t) + ")");
    return next;
}

/// Integrates on [t0, t1] with the forcing evaluated analytically at step
/// boundaries. The forcing must have state width (use expand() for
/// channel-mapped signals).
inline Trajectory simulate(const NetworkModel& model, const Signal& forcing, const Vec& x0,
                           double t0, double t1, double dt) {
    require(t1 > t0, "simulate: t1 must be greater than t0");
    require(dt > 0, "simulate: dt must be positive");
    require(x0.size() == model.state_size(), "simulate: initial state has wrong dimension");
    require(forcing.channels() == model.state_size(),
            "simulate: forcing width must equal the flat state size");
    const int n_steps = static_cast<int>(std::lround((t1 - t0) / dt));
    require(n_steps >= 1, "simulate: interval shorter than one step");

    Trajectory traj;
    traj.t0 = t0;
    traj.dt = dt;
    traj.states.resize(model.state_size(), n_steps + 1);
    traj.states.col(0) = x0;
    model.check_state(x0, 0);

    Vec g_t(model.state_size()), g_next(model.state_size());
    forcing.eval_into(t0, g_t);
    Vec x = x0;
    for (int k = 0; k < n_steps; ++k) {
        const double t = t0 + k * dt;
        forcing.eval_into(t + dt, g_next);
        x = heun_step(model, t, x, g_t, g_next, dt, static_cast<std::size_t>(k));
        model.check_state(x, static_cast<std::size_t>(k + 1));
        traj.states.col(k + 1) = x;
        std::swap(g_t, g_next);
    }
    return traj;
}

}  // namespace rcdetect
