#include "moew/gpr.hpp"

#include "moew/errors.hpp"

#include <algorithm>
#include <cmath>

namespace moew {

ValueScaling ValueScaling::from_values(const std::vector<double>& values) {
    ValueScaling s;
    if (values.empty()) return s;
    double sum = 0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    const bool distinct = std::any_of(values.begin(), values.end(), [&](double v) { return v != values.front(); });
    if (distinct) {
        double ss = 0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        const double sd = std::sqrt(ss / static_cast<double>(values.size()));
        if (sd > 0.0) s.sd = sd;
    }
    return s;
}

GprModel GprModel::fit(std::vector<Observation> points, double kernel_width, double noise_variance,
                       std::optional<ValueScaling> scaling) {
    if (points.empty()) throw ContractError("GP fit needs at least one observation");
    if (!(kernel_width > 0.0)) throw ContractError("kernel width must be positive");
    if (!(noise_variance >= 0.0)) throw ContractError("noise variance must be non-negative");
    const auto n = static_cast<Eigen::Index>(points.size());
    const auto d = points.front().alpha.size();
    GprModel g;
    g.width_ = kernel_width;
    g.noise_ = noise_variance;
    g.X_.resize(n, d);
    std::vector<double> values;
    values.reserve(points.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        if (p.alpha.size() != d) throw ContractError("observations differ in dimension");
        if (!std::isfinite(p.value) || !p.alpha.allFinite()) throw ContractError("observations must be finite");
        g.X_.row(i) = p.alpha.transpose();
        values.push_back(p.value);
    }
    g.scaling_ = scaling ? *scaling : ValueScaling::from_values(values);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = (values[static_cast<std::size_t>(i)] - g.scaling_.mean) / g.scaling_.sd;

    Matrix K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i) = rbf_kernel(g.X_.row(i), g.X_.row(j), kernel_width);
    }
    const double scaled_noise = noise_variance / (g.scaling_.sd * g.scaling_.sd);
    bool ok = false;
    for (double jitter = 1e-9; jitter <= 1e-3 * 1.0000001; jitter *= 10.0) {
        Matrix A = K;
        A.diagonal().array() += scaled_noise + jitter;
        g.llt_.compute(A);
        if (g.llt_.info() == Eigen::Success) {
            const Matrix& L = g.llt_.matrixLLT();
            if ((L.diagonal().array() > 0.0).all() && L.diagonal().allFinite()) {
                g.jitter_ = jitter;
                ok = true;
                break;
            }
        }
    }
    if (!ok) throw NumericalError("GP kernel matrix is not positive definite even with jitter 1e-3");
    g.weights_ = g.llt_.solve(y);
    g.points_ = std::move(points);
    return g;
}

void GprModel::predict(const Matrix& queries, Vector& mean, Vector* variance) const {
    if (queries.cols() != X_.cols()) throw ContractError("query dimension does not match GP");
    const double inv2w2 = 1.0 / (2.0 * width_ * width_);
    // ||q - x||^2 = ||q||^2 + ||x||^2 - 2 q.x
    Matrix Kq = -2.0 * queries * X_.transpose();
    Kq.colwise() += queries.rowwise().squaredNorm();
    Kq.rowwise() += X_.rowwise().squaredNorm().transpose();
    Kq = (-(Kq.array().max(0.0)) * inv2w2).exp().matrix();
    mean = (Kq * weights_).array() * scaling_.sd + scaling_.mean;
    if (variance) {
        Matrix V = Kq.transpose();  // n x m
        llt_.matrixL().solveInPlace(V);
        *variance = (1.0 - V.colwise().squaredNorm().transpose().array()).max(0.0) * (scaling_.sd * scaling_.sd);
    }
}

Prediction GprModel::predict(const Vector& alpha) const {
    if (alpha.size() != X_.cols()) throw ContractError("query dimension does not match GP");
    const Eigen::Index n = X_.rows();
    Vector k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = rbf_kernel(alpha, X_.row(i).transpose(), width_);
    Prediction p;
    p.mean = k.dot(weights_) * scaling_.sd + scaling_.mean;
    Vector v = llt_.matrixL().solve(k);
    p.variance = std::max(0.0, 1.0 - v.squaredNorm()) * scaling_.sd * scaling_.sd;
    return p;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ContractError("normal quantile needs p in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement brings the relative error near machine precision.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double quantile(double mean, double variance, double level) {
    if (!(level > 0.0 && level < 100.0)) throw ContractError("quantile level must lie in (0,100)");
    if (!(variance >= 0.0)) throw ContractError("variance must be non-negative");
    if (level == 50.0) return mean;
    return mean + normal_quantile(level / 100.0) * std::sqrt(variance);
}

} // namespace moew
