#include "tplab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tplab/errors.hpp"
#include "tplab/kernels.hpp"

namespace tplab {

MeanErr mean_stderr(std::span<const double> xs) {
    if (xs.empty()) throw ConfigError("mean_stderr: empty sample");
    MeanErr out;
    out.n = xs.size();
    out.mean = kern::sum(xs.data(), xs.size()) / static_cast<double>(xs.size());
    if (xs.size() == 1) return out;
    double ss = 0.0;
    for (const double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    out.se = std::sqrt(var / static_cast<double>(xs.size()));
    return out;
}

namespace {

void check_grid(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ConfigError("curve: x and y sizes differ");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1])) throw ConfigError("curve: x grid must be strictly increasing");
}

}  // namespace

double trapezoid_auc(std::span<const double> xs, std::span<const double> ys) {
    check_grid(xs, ys);
    if (xs.size() < 2) throw ConfigError("trapezoid_auc: need at least 2 points");
    double auc = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        auc += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) / 2.0;
    return auc;
}

double intersection_fraction(std::span<const double> fractions, std::span<const double> accs,
                             double reference) {
    check_grid(fractions, accs);
    if (fractions.empty()) throw ConfigError("intersection_fraction: empty curve");
    if (accs[0] >= reference) return fractions[0];
    for (std::size_t i = 1; i < fractions.size(); ++i) {
        if (accs[i] >= reference) {
            const double dy = accs[i] - accs[i - 1];
            if (dy <= 0.0) return fractions[i];  // flat or re-touching segment: reached at its end
            return fractions[i - 1] + (reference - accs[i - 1]) * (fractions[i] - fractions[i - 1]) / dy;
        }
    }
    return std::numeric_limits<double>::infinity();
}

namespace {

std::vector<double> average_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("spearman: size mismatch");
    if (a.size() < 2) throw ConfigError("spearman: need at least 2 points");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = kern::sum(ra.data(), ra.size()) / n;
    const double mb = kern::sum(rb.data(), rb.size()) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - ma;
        const double db = rb[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;  // a constant input has no ranking
    return sab / std::sqrt(saa * sbb);
}

BatchDiversity batch_diversity(const std::vector<std::vector<double>>& batch,
                               const std::vector<std::vector<double>>& pool) {
    if (batch.empty()) throw ConfigError("batch_diversity: empty batch");
    BatchDiversity out;
    if (batch.size() > 1) {
        double sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < batch.size(); ++i)
            for (std::size_t j = i + 1; j < batch.size(); ++j) {
                sum += std::sqrt(kern::sq_dist(batch[i].data(), batch[j].data(), batch[i].size()));
                ++pairs;
            }
        out.mean_pairwise = sum / static_cast<double>(pairs);
    }
    for (const std::vector<double>& x : pool) {
        double best = std::numeric_limits<double>::infinity();
        for (const std::vector<double>& s : batch)
            best = std::min(best, kern::sq_dist(x.data(), s.data(), x.size()));
        out.covering_radius = std::max(out.covering_radius, std::sqrt(best));
    }
    return out;
}

}  // namespace tplab
