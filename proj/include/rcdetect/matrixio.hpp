#pragma once

// Binary matrix blobs (row-major, full precision) and CSV writers.

#include "rcdetect/common.hpp"
#include "rcdetect/models.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace rcdetect {

namespace detail {
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
}  // namespace detail

inline void write_matrix(const std::filesystem::path& path, const Mat& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("write_matrix: cannot open " + path.string());
    os.write("RCDMAT1\n", 8);
    detail::write_u64(os, static_cast<std::uint64_t>(m.rows()));
    detail::write_u64(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            os.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    if (!os) throw Error("write_matrix: write failed for " + path.string());
}

inline Mat read_matrix(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("read_matrix: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "RCDMAT1\n") throw Error("read_matrix: bad magic in " + path.string());
    const auto rows = static_cast<Eigen::Index>(detail::read_u64(is));
    const auto cols = static_cast<Eigen::Index>(detail::read_u64(is));
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            double v;
            is.read(reinterpret_cast<char*>(&v), sizeof(v));
            m(i, j) = v;
        }
    if (!is) throw Error("read_matrix: truncated file " + path.string());
    return m;
}

inline void write_sparse(const std::filesystem::path& path, const SpMat& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("write_sparse: cannot open " + path.string());
    os.write("RCDSPM1\n", 8);
    detail::write_u64(os, static_cast<std::uint64_t>(m.rows()));
    detail::write_u64(os, static_cast<std::uint64_t>(m.cols()));
    detail::write_u64(os, static_cast<std::uint64_t>(m.nonZeros()));
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SpMat::InnerIterator it(m, k); it; ++it) {
            detail::write_u64(os, static_cast<std::uint64_t>(it.row()));
            detail::write_u64(os, static_cast<std::uint64_t>(it.col()));
            const double v = it.value();
            os.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
    if (!os) throw Error("write_sparse: write failed for " + path.string());
}

inline SpMat read_sparse(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("read_sparse: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "RCDSPM1\n") throw Error("read_sparse: bad magic in " + path.string());
    const auto rows = static_cast<Eigen::Index>(detail::read_u64(is));
    const auto cols = static_cast<Eigen::Index>(detail::read_u64(is));
    const auto nnz = detail::read_u64(is);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    for (std::uint64_t k = 0; k < nnz; ++k) {
        const auto i = static_cast<int>(detail::read_u64(is));
        const auto j = static_cast<int>(detail::read_u64(is));
        double v;
        is.read(reinterpret_cast<char*>(&v), sizeof(v));
        trips.emplace_back(i, j, v);
    }
    if (!is) throw Error("read_sparse: truncated file " + path.string());
    SpMat m(rows, cols);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

/// Shortest decimal form that round-trips a double (17 significant digits).
inline std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Wide CSV: header `t,x_0,...,x_{ND-1}`, one row per step.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream os(path);
    if (!os) throw Error("write_trajectory_csv: cannot open " + path.string());
    os << "t";
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) os << ",x_" << i;
    os << "\n";
    for (int k = 0; k < traj.samples(); ++k) {
        os << format_full(traj.time_at(k));
        for (Eigen::Index i = 0; i < traj.states.rows(); ++i)
            os << "," << format_full(traj.states(i, k));
        os << "\n";
    }
    if (!os) throw Error("write_trajectory_csv: write failed for " + path.string());
}

/// Column-labelled CSV with a shared time axis; `columns` pairs a header name
/// with a row index into `values` (channels x samples).
inline void write_series_csv(const std::filesystem::path& path, double t0, double dt,
                             const std::vector<std::string>& names, const Mat& values) {
    require(static_cast<Eigen::Index>(names.size()) == values.rows(),
            "write_series_csv: one name per row required");
    std::ofstream os(path);
    if (!os) throw Error("write_series_csv: cannot open " + path.string());
    os << "t";
    for (const auto& n : names) os << "," << n;
    os << "\n";
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
        os << format_full(t0 + static_cast<double>(k) * dt);
        for (Eigen::Index i = 0; i < values.rows(); ++i) os << "," << format_full(values(i, k));
        os << "\n";
    }
    if (!os) throw Error("write_series_csv: write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw Error("write_text: cannot open " + path.string());
    os << content;
    if (!os) throw Error("write_text: write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("read_text: cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace rcdetect
