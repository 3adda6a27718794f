#include "mars/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mars/errors.hpp"

namespace mars {

std::vector<double> fractional_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) share the average 1-based rank.
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("pearson requires equal-length series");
    const std::size_t n = x.size();
    if (n < 2) throw InsufficientData("correlation requires at least 2 points");

    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("spearman requires equal-length series");
    return pearson(fractional_ranks(x), fractional_ranks(y));
}

HyperbolicFit fit_hyperbolic(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("fit requires equal-length series");
    const std::size_t n = x.size();
    if (n < 2) throw InsufficientData("hyperbolic fit requires at least 2 points");

    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] == 0.0) throw ValidationError("hyperbolic fit requires nonzero x values");
        u[i] = 1.0 / x[i];
    }
    const double mu = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double suy = 0.0, suu = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        suy += (u[i] - mu) * (y[i] - my);
        suu += (u[i] - mu) * (u[i] - mu);
    }
    if (suu == 0.0) throw InsufficientData("hyperbolic fit is degenerate: all x equal");

    HyperbolicFit fit;
    fit.a = suy / suu;
    fit.b = my - fit.a * mu;

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double predicted = fit.a * u[i] + fit.b;
        ss_res += (y[i] - predicted) * (y[i] - predicted);
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

} // namespace mars
