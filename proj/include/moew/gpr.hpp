#pragma once

#include "moew/data.hpp"

#include <optional>
#include <vector>

namespace moew {

struct Observation {
    Vector alpha;
    double value = 0.0;
};

/// Affine map between metric units and the unit-variance space the GP works in.
struct ValueScaling {
    double mean = 0.0;
    double sd = 1.0;

    /// Zero mean and unit variance over `values`; sd stays 1 unless there are at least two distinct values.
    static ValueScaling from_values(const std::vector<double>& values);
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

inline double rbf_kernel(const Vector& a, const Vector& b, double width) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * width * width));
}

/// Exact GP regression with an RBF kernel and unit signal variance in scaled value space.
class GprModel {
public:
    /// `noise_variance` is in metric units and is rescaled with the values. When `scaling`
    /// is given it is used as-is instead of being computed from the points.
    static GprModel fit(std::vector<Observation> points, double kernel_width, double noise_variance,
                        std::optional<ValueScaling> scaling = std::nullopt);

    /// Posterior mean and function variance (observation noise excluded), in metric units.
    Prediction predict(const Vector& alpha) const;
    /// Batched predict over the rows of `queries`.
    void predict(const Matrix& queries, Vector& mean, Vector* variance) const;

    const std::vector<Observation>& points() const { return points_; }
    const ValueScaling& scaling() const { return scaling_; }
    double kernel_width() const { return width_; }
    double noise_variance() const { return noise_; }
    /// Jitter that made the factorization succeed.
    double jitter() const { return jitter_; }
    int dim() const { return static_cast<int>(X_.cols()); }

private:
    std::vector<Observation> points_;
    Matrix X_;               // n x d
    Eigen::LLT<Matrix> llt_; // K + (noise + jitter) I in scaled space
    Vector weights_;         // (K + s I)^-1 y_scaled
    ValueScaling scaling_;
    double width_ = 1.0;
    double noise_ = 0.0;
    double jitter_ = 0.0;
};

/// Standard normal inverse CDF (rational approximation refined by one Halley step).
double normal_quantile(double p);
double normal_cdf(double x);

/// mean + Phi^-1(level / 100) * sqrt(variance), level in (0, 100).
double quantile(double mean, double variance, double level);

} // namespace moew
