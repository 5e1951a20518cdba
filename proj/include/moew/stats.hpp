#pragma once

#include <cstddef>
#include <vector>

namespace moew {

struct Summary {
    double mean = 0.0;
    double sd = 0.0;      // sample standard deviation
    double margin = 0.0;  // 1.96 * sd / sqrt(n)
    std::size_t n = 0;
};

/// Mean and 95% error margin over repeats. Needs at least two values.
Summary summarize(const std::vector<double>& values);

/// Pearson correlation. Needs at least two pairs and non-constant columns.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

} // namespace moew
