#include "moew/search.hpp"

#include "moew/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace moew {

void BucbConfig::validate() const {
    if (batch_size < 1) throw ContractError("batch size K must be >= 1");
    if (!(p >= 0.0 && p <= 100.0) || !(q >= 0.0 && q <= 100.0)) throw ContractError("p and q must lie in [0,100]");
    if (!(radius > 0.0)) throw ContractError("ball radius must be positive");
    if (acquisition_samples < 1) throw ContractError("acquisition_samples must be >= 1");
}

Vector sample_ball(Rng& rng, int dim, double radius) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = normal(rng);
        norm = v.norm();
    } while (norm == 0.0);
    const double r = radius * std::pow(unif(rng), 1.0 / dim);
    return v * (r / norm);
}

std::vector<Vector> get_candidates_random(int count, int dim, double radius, std::uint64_t seed) {
    if (count < 1) throw ContractError("candidate count must be >= 1");
    if (dim < 1) throw ContractError("dimension must be >= 1");
    if (!(radius > 0.0)) throw ContractError("ball radius must be positive");
    Rng rng(seed);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(sample_ball(rng, dim, radius));
    return out;
}

namespace {

/// Standard normal quantile of a percent level, clamped away from 0 and 100.
double z_of_level(double level) {
    if (level == 50.0) return 0.0;
    level = std::clamp(level, 1e-9, 100.0 - 1e-9);
    return normal_quantile(level / 100.0);
}

} // namespace

std::vector<Vector> get_candidates_bucb(const History& history, int dim, const BucbConfig& cfg,
                                        double noise_variance) {
    cfg.validate();
    if (dim < 1) throw ContractError("dimension must be >= 1");
    if (history.empty()) return get_candidates_random(cfg.batch_size, dim, cfg.radius, cfg.seed);
    for (const auto& h : history)
        if (h.alpha.size() != dim) throw ContractError("history alpha has the wrong dimension");

    // Search set: origin, history, then uniform ball samples.
    Rng rng(cfg.seed);
    const auto n_hist = static_cast<Eigen::Index>(history.size());
    Matrix pool(1 + n_hist + cfg.acquisition_samples, dim);
    pool.row(0).setZero();
    for (Eigen::Index i = 0; i < n_hist; ++i) pool.row(1 + i) = history[static_cast<std::size_t>(i)].alpha.transpose();
    for (int i = 0; i < cfg.acquisition_samples; ++i)
        pool.row(1 + n_hist + i) = sample_ball(rng, dim, cfg.radius).transpose();

    std::vector<double> values;
    for (const auto& h : history) values.push_back(h.value);
    const ValueScaling scaling = ValueScaling::from_values(values);

    const double z_up = z_of_level(50.0 + cfg.p / 2.0);
    const double z_down = z_of_level(50.0 - cfg.q / 2.0);
    const bool need_variance = z_up != 0.0 || z_down != 0.0;

    std::vector<Observation> obs = history;
    std::vector<Vector> picks;
    Vector mean, var;
    for (int j = 0; j < cfg.batch_size; ++j) {
        auto g = GprModel::fit(obs, cfg.radius, noise_variance, scaling);
        g.predict(pool, mean, need_variance ? &var : nullptr);
        Eigen::Index best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < pool.rows(); ++i) {
            const double a = z_up == 0.0 ? mean[i] : mean[i] + z_up * std::sqrt(var[i]);
            if (a > best_val) {
                best_val = a;
                best = i;
            }
        }
        Vector pick = pool.row(best).transpose();
        const double hallucinated = z_down == 0.0 ? mean[best] : mean[best] + z_down * std::sqrt(var[best]);
        obs.push_back(Observation{pick, hallucinated});
        picks.push_back(std::move(pick));
    }
    return picks;
}

double cover_size_bound(int dim, double epsilon) { return std::pow(1.0 + 2.0 / epsilon, dim); }

namespace {

struct LatticeWalk {
    int dim;
    double spacing;
    long kmax;
    std::size_t limit;
    std::vector<long> k;
    std::size_t count = 0;
    std::vector<Vector>* out = nullptr;

    // Squared distance from the origin to the closed cell around k * spacing, one axis.
    double axis_gap2(long ki) const {
        const double g = std::max(0.0, std::abs(static_cast<double>(ki)) * spacing - 0.5 * spacing);
        return g * g;
    }

    void walk(int axis, double gap2) {
        if (count > limit) return;
        if (axis == dim) {
            ++count;
            if (out) {
                Vector c(dim);
                for (int i = 0; i < dim; ++i) c[i] = static_cast<double>(k[static_cast<std::size_t>(i)]) * spacing;
                const double norm = c.norm();
                if (norm > 1.0) c /= norm;
                out->push_back(std::move(c));
            }
            return;
        }
        for (long ki = -kmax; ki <= kmax; ++ki) {
            const double g2 = gap2 + axis_gap2(ki);
            if (g2 > 1.0) continue;
            k[static_cast<std::size_t>(axis)] = ki;
            walk(axis + 1, g2);
        }
    }
};

} // namespace

std::vector<Vector> get_candidates_grid(int dim, double epsilon, std::size_t cap) {
    if (dim < 1) throw ContractError("dimension must be >= 1");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ContractError("epsilon must lie in (0,1]");
    const double spacing = 2.0 * epsilon / std::sqrt(static_cast<double>(dim));
    LatticeWalk lw{dim, spacing, static_cast<long>(std::ceil((1.0 + 0.5 * spacing) / spacing)),
                   cap * 1000, std::vector<long>(static_cast<std::size_t>(dim), 0)};
    lw.walk(0, 0.0);
    if (lw.count > cap) throw SizeError(lw.count, cap);

    std::vector<Vector> cells;
    cells.reserve(lw.count);
    lw.count = 0;
    lw.out = &cells;
    lw.walk(0, 0.0);

    auto less = [](const Vector& a, const Vector& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    };
    std::sort(cells.begin(), cells.end(), less);
    cells.erase(std::unique(cells.begin(), cells.end(), [](const Vector& a, const Vector& b) { return a == b; }),
                cells.end());
    // Origin first.
    auto origin = std::find_if(cells.begin(), cells.end(), [](const Vector& v) { return v.isZero(0.0); });
    if (origin != cells.end()) std::rotate(cells.begin(), origin, origin + 1);
    return cells;
}

} // namespace moew
