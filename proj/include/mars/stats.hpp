#pragma once

#include <vector>

namespace mars {

// Fractional (average-of-positions) ranks, 1-based; ties share the mean rank.
std::vector<double> fractional_ranks(const std::vector<double>& values);

// Returns NaN when either side has zero variance. Throws InsufficientData
// for fewer than 2 points.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Rank correlation: Pearson over fractional ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct HyperbolicFit {
    double a = 0.0;  // y ≈ a/x + b
    double b = 0.0;
    double r_squared = 0.0;
};

// Least squares on the transformed regressor u = 1/x. All x must be nonzero.
// Throws InsufficientData for fewer than 2 points or degenerate u variance.
HyperbolicFit fit_hyperbolic(const std::vector<double>& x, const std::vector<double>& y);

} // namespace mars
