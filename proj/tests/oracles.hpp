#pragma once

// Independent oracles used by the test and acceptance suites. These must stay
// independent of the library code paths they check: the ridge oracle descends
// the cost directly, the Jacobian oracle uses central differences.

#include "rcdetect/common.hpp"
#include "rcdetect/models.hpp"

namespace rcdetect::oracle {

/// Minimizes ||Y - W R||^2 + lambda Tr(W W^T) by gradient descent with an
/// exact line search (the cost is quadratic in W). Returns the iterate when
/// the gradient norm falls below gtol.
inline Mat ridge_gradient_descent(const Mat& R, const Mat& Y, double lambda,
                                  int max_iter = 200000, double gtol = 1e-12) {
    Mat W = Mat::Zero(Y.rows(), R.rows());
    const Mat RRt = R * R.transpose();
    const Mat YRt = Y * R.transpose();
    for (int it = 0; it < max_iter; ++it) {
        const Mat grad = 2.0 * (W * RRt - YRt + lambda * W);
        const double gnorm = grad.norm();
        if (gnorm < gtol) break;
        // exact step along -grad: alpha = |g|^2 / (2 g:(g RRt + lambda g))
        const Mat hg = grad * RRt + lambda * grad;
        const double denom = 2.0 * (grad.array() * hg.array()).sum();
        if (denom <= 0) break;
        const double alpha = (grad.array() * grad.array()).sum() / denom;
        W -= alpha * grad;
    }
    return W;
}

/// Central finite differences of the intrinsic Lotka-Volterra field.
inline Mat lv_jacobian_fd(const LotkaVolterraParams& p, const Vec& x, double h = 1e-6) {
    const int n = p.size();
    Mat J(n, n);
    const Vec zero = Vec::Zero(n);
    for (int j = 0; j < n; ++j) {
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (lv_vector_field(p, 0.0, xp, zero) - lv_vector_field(p, 0.0, xm, zero)) / (2 * h);
    }
    return J;
}

}  // namespace rcdetect::oracle
