#pragma once

// Random reservoir construction, the (optionally leaky) discrete-time update,
// and ridge-regression readout training.

#include "rcdetect/common.hpp"
#include "rcdetect/models.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <iostream>

namespace rcdetect {

struct ReservoirOptions {
    int size = 1000;              // M
    int input_dim = 0;            // d_in
    double density = -1.0;        // per-entry nonzero probability; <0 means 6/size
    double spectral_radius = 1.2;
    double input_scale = 0.01;
    double leak = 0.0;            // a_leak in [0,1]; 0 recovers the plain update

    double effective_density() const { return density < 0 ? 6.0 / size : density; }
    void validate() const {
        require(size >= 1, "ReservoirOptions: size must be >= 1");
        require(input_dim >= 1, "ReservoirOptions: input_dim must be >= 1");
        require(effective_density() * size >= 1.0,
                "ReservoirOptions: expected nonzeros per row must be >= 1");
        require(spectral_radius > 0, "ReservoirOptions: spectral radius target must be positive");
        require(leak >= 0.0 && leak <= 1.0, "ReservoirOptions: leak must lie in [0,1]");
    }
};

struct Reservoir {
    int size = 0;
    int input_dim = 0;
    SpMat internal;   // A, size x size, rescaled to the target spectral radius
    Mat input;        // W_in, size x input_dim
    double bias = 1.0;
    double leak = 0.0;
    Vec state;        // r

    void reset() { state.setZero(); }
};

/// Spectral radius of a real sparse matrix by power iteration. Convergence of
/// the plain iteration fails for complex-conjugate leading pairs, so each
/// sweep fits the two-step recurrence A^2 v = a Av + b v restricted to the
/// current Krylov pair and takes the dominant root magnitude of
/// z^2 - a z - b; for a converged real direction this reduces to |Av|.
inline double spectral_radius(const SpMat& A, double tol = 1e-8, int max_iter = 10000,
                              std::uint64_t seed = 0x5eedULL) {
    const int n = static_cast<int>(A.rows());
    require(A.cols() == n, "spectral_radius: matrix must be square");
    if (n == 0 || A.nonZeros() == 0) return 0.0;

    Rng rng(seed);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    v.normalize();

    double estimate = -1.0;
    int stable = 0;
    for (int it = 0; it < max_iter; ++it) {
        const Vec y = A * v;
        const double ny = y.norm();
        if (!(ny > 1e-300)) return 0.0;  // (numerically) nilpotent
        const Vec z = A * y;

        const double gyy = y.squaredNorm();
        const double gyv = y.dot(v);
        const double gyz = y.dot(z);
        const double gvz = v.dot(z);
        const double det = gyy - gyv * gyv;  // v is unit length
        double current;
        if (det > 1e-12 * gyy) {
            const double a = (gyz - gvz * gyv) / det;
            const double b = (gyy * gvz - gyv * gyz) / det;
            const double disc = a * a + 4.0 * b;
            if (disc >= 0.0) {
                const double r = std::sqrt(disc);
                current = std::max(std::abs(a + r), std::abs(a - r)) / 2.0;
            } else {
                current = std::sqrt(-b);
            }
        } else {
            current = ny;
        }
        if (std::isfinite(current) && std::abs(current - estimate) <= tol * std::max(1.0, std::abs(current))) {
            if (++stable >= 5) return current;
        } else {
            stable = 0;
        }
        estimate = current;
        v = y / ny;
    }
    throw Error("spectral_radius: power iteration did not converge within " +
                std::to_string(max_iter) + " iterations");
}

/// Draws A (sparse, entries U[-0.5,0.5] with the configured per-entry
/// probability) and W_in (dense, U[-scale,scale]), then rescales A to the
/// target spectral radius. A draw with numerically zero radius is resampled
/// with an incremented seed and reported on stderr.
inline Reservoir build_reservoir(const ReservoirOptions& opts, std::uint64_t seed) {
    opts.validate();
    const int m = opts.size;
    const double density = opts.effective_density();

    Reservoir res;
    res.size = m;
    res.input_dim = opts.input_dim;
    res.leak = opts.leak;

    for (int attempt = 0;; ++attempt) {
        if (attempt >= 100)
            throw Error("build_reservoir: repeated zero-spectral-radius draws; check density");
        Rng rng(seed + static_cast<std::uint64_t>(attempt));
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(density * m * m * 1.2) + 8);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (rng.uniform01() < density)
                    trips.emplace_back(i, j, rng.uniform(-0.5, 0.5));
            }
        }
        SpMat A(m, m);
        A.setFromTriplets(trips.begin(), trips.end());
        double rho = 0.0;
        if (A.nonZeros() > 0) rho = spectral_radius(A, 1e-8, 10000, mix_seed(seed, 0x5Bu));
        if (rho <= 1e-12) {
            std::cerr << "build_reservoir: drawn matrix has numerically zero spectral radius; "
                         "resampling with seed+" << (attempt + 1) << "\n";
            continue;
        }
        res.internal = A * (opts.spectral_radius / rho);

        res.input.resize(m, opts.input_dim);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < opts.input_dim; ++j) res.input(i, j) = rng.uniform(-opts.input_scale, opts.input_scale);
        break;
    }
    res.state = Vec::Zero(m);
    return res;
}

/// Reservoir states over time; column k is the state produced from the input
/// at column k of the driving trajectory (and is paired with that time). The
/// first `washout` columns are excluded from training/scoring.
struct StateHistory {
    double t0 = 0.0;
    double dt = 0.0;
    int washout = 0;
    Mat states;  // M x T

    int samples() const { return static_cast<int>(states.cols()); }
    int retained() const { return samples() - washout; }
    auto retained_states() const { return states.rightCols(retained()); }
};

/// Default washout: max(100 steps, 1% of the run), stretched by the leak
/// memory factor 1/(1-a) and capped at a quarter of the run.
inline int default_washout(int n_samples, double leak) {
    int base = std::max(100, n_samples / 100);
    if (leak > 0.0 && leak < 1.0)
        base = static_cast<int>(base * std::ceil(1.0 / (1.0 - leak)));
    return std::min(base, n_samples / 4);
}

/// Iterates r <- a r + (1-a) tanh(A r + W_in x + 1) over the trajectory
/// columns, starting from (and updating) the reservoir's current state.
inline StateHistory drive(Reservoir& res, const Trajectory& inputs, int washout = -1) {
    require(static_cast<int>(inputs.states.rows()) == res.input_dim,
            "drive: input row count must equal the reservoir input dimension");
    const int T = inputs.samples();
    StateHistory hist;
    hist.t0 = inputs.t0;
    hist.dt = inputs.dt;
    hist.washout = washout >= 0 ? std::min(washout, T) : default_washout(T, res.leak);
    hist.states.resize(res.size, T);

    Vec r = res.state;
    Vec z(res.size);
    const double a = res.leak;
    for (int k = 0; k < T; ++k) {
        z.noalias() = res.internal * r;
        z.noalias() += res.input * inputs.states.col(k);
        z.array() += res.bias;
        r = a * r + (1.0 - a) * z.array().tanh().matrix();
        hist.states.col(k) = r;
    }
    res.state = r;
    return hist;
}

/// Linear readout trained by ridge regression.
struct Readout {
    Mat output;      // W_out, d_out x M
    double lambda = 0.0;
    int washout = 0; // washout used during training
};

/// Solves min ||Y - W R||_F^2 + lambda Tr(W W^T) via the normal equations
/// W (R R^T + lambda I) = Y R^T with a Cholesky factorization. Targets may be
/// given for all samples (trimmed here) or pre-trimmed to the retained span.
inline Readout train_readout(const StateHistory& states, const Mat& targets, double lambda) {
    require(lambda >= 0.0, "train_readout: lambda must be nonnegative");
    const int kept = states.retained();
    require(kept > 0, "train_readout: no retained samples after washout");
    require(targets.cols() == states.samples() || targets.cols() == kept,
            "train_readout: target columns must match the state history (full or retained)");
    const auto R = states.retained_states();
    const auto Y = targets.rightCols(kept);

    Mat gram = Mat::Zero(states.states.rows(), states.states.rows());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(R);
    gram.diagonal().array() += lambda;

    Eigen::LLT<Mat> llt(gram);  // reads the lower triangle filled by rankUpdate
    if (llt.info() != Eigen::Success)
        throw Error("train_readout: R R^T + lambda I is numerically singular; use lambda > 0");

    Readout out;
    out.lambda = lambda;
    out.washout = states.washout;
    out.output = llt.solve(R * Y.transpose()).transpose();
    return out;
}

/// U(t) = W_out r(t), one output column per state column.
inline Mat readout_apply(const Readout& readout, const Mat& states) {
    require(states.rows() == readout.output.cols(),
            "readout_apply: state dimension does not match the readout");
    return readout.output * states;
}
inline Mat readout_apply(const Readout& readout, const StateHistory& states) {
    return readout_apply(readout, states.states);
}

/// Value of the training objective; used by optimality checks.
inline double ridge_cost(const Mat& W, const Mat& R, const Mat& Y, double lambda) {
    return (Y - W * R).squaredNorm() + lambda * W.squaredNorm();
}

}  // namespace rcdetect
