#include "moew/stats.hpp"

#include "moew/errors.hpp"

#include <cmath>

namespace moew {

Summary summarize(const std::vector<double>& values) {
    if (values.size() < 2) throw ContractError("a summary needs at least two repeats");
    Summary s;
    s.n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.margin = 1.96 * s.sd / std::sqrt(static_cast<double>(s.n));
    return s;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("correlation inputs differ in length");
    if (x.size() < 2) throw ContractError("correlation needs at least two rows");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ContractError("correlation undefined for a constant column");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace moew
