#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tplab {

struct MeanErr {
    double mean = 0.0;
    double se = 0.0;  // sample stddev (n-1 denominator) over sqrt(n)
    std::size_t n = 0;
};

MeanErr mean_stderr(std::span<const double> xs);

// Trapezoid rule over a strictly increasing x grid.
double trapezoid_auc(std::span<const double> xs, std::span<const double> ys);

// Smallest labeled fraction at which the piecewise-linear accuracy curve
// first reaches `reference`. +infinity when it never does.
double intersection_fraction(std::span<const double> fractions, std::span<const double> accs,
                             double reference);

// Rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

struct BatchDiversity {
    double mean_pairwise = 0.0;    // mean euclidean distance over batch pairs
    double covering_radius = 0.0;  // max over pool of distance to nearest batch point
};

BatchDiversity batch_diversity(const std::vector<std::vector<double>>& batch,
                               const std::vector<std::vector<double>>& pool);

}  // namespace tplab
