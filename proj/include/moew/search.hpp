#pragma once

#include "moew/data.hpp"
#include "moew/gpr.hpp"
#include "moew/random.hpp"

#include <cstdint>
#include <vector>

namespace moew {

/// Explore/exploit settings of the batched GP-UCB candidate generator.
struct BucbConfig {
    int batch_size = 20;            // K
    double p = 68.3;                // optimistic interval width, percent
    double q = 68.3;                // hallucination interval width, percent
    double radius = 3.0;            // R
    int acquisition_samples = 10000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Prior (alpha, validation metric) pairs.
using History = std::vector<Observation>;

/// Uniform draw from the d-ball of radius `radius`.
Vector sample_ball(Rng& rng, int dim, double radius);

std::vector<Vector> get_candidates_random(int count, int dim, double radius, std::uint64_t seed);

/// Batched GP-UCB: each pick maximizes the (50 + p/2)% quantile of the GP over a seeded
/// random sample of the ball (plus history and the origin); the pick is then added as a
/// hallucinated observation at its (50 - q/2)% quantile. An empty history yields seeded
/// uniform ball samples. The value scaling is frozen from the real observations.
std::vector<Vector> get_candidates_bucb(const History& history, int dim, const BucbConfig& cfg,
                                        double noise_variance);

/// Lattice of spacing 2*epsilon/sqrt(d) around the origin: every cell meeting the unit ball
/// contributes its centre, projected onto the ball when it lies outside. Every point of the
/// unit ball is then within epsilon of a member.
std::vector<Vector> get_candidates_grid(int dim, double epsilon, std::size_t cap = 1'000'000);

/// (1 + 2/epsilon)^d.
double cover_size_bound(int dim, double epsilon);

} // namespace moew
