#pragma once

#include <span>
#include <vector>

namespace tplab {

// Settings for the loss-module objective. The ranking margin xi, the L1 dead
// zone zeta and the L1 weight lambda default to 0.5; the module weight eta
// defaults to 1. Two switchable conventions are kept:
//  - l1_mode: hard_threshold keeps the full |l - lhat| once it exceeds zeta,
//    hinge subtracts zeta. Both have the same subgradient away from the edge.
//  - ranking_sign_mode: yoo_convention penalizes a misordered pair,
//    max(0, -S(l_i - l_j) (lhat_i - lhat_j) + xi); as_printed keeps the
//    opposite typeset sign on the product.
struct LossCfg {
    enum class L1Mode { hard_threshold, hinge };
    enum class RankSign { yoo_convention, as_printed };

    double xi = 0.5;
    double zeta = 0.5;
    double lambda = 0.5;
    double eta = 1.0;
    L1Mode l1_mode = L1Mode::hard_threshold;
    RankSign ranking_sign_mode = RankSign::yoo_convention;

    void validate() const;
};

// -log softmax(logits)[y], evaluated via log-sum-exp.
double cross_entropy(std::span<const double> logits, int y);

void softmax(std::span<const double> logits, std::span<double> out);

// +1 for v > 0, otherwise -1 (zero counts as negative).
double sign_star(double v);

double l1_margin(double l, double lhat, double zeta, LossCfg::L1Mode mode);

// Pairwise ranking loss over a batch paired as (0,1), (2,3), ... Batch size
// must be even and >= 2. Scaled by 2/B.
double ranking_loss(std::span<const double> l, std::span<const double> lhat,
                    double xi, LossCfg::RankSign mode);

// ranking_loss + (lambda / B) * sum_i l1_margin(l_i, lhat_i, zeta).
double loss_module_loss(std::span<const double> l, std::span<const double> lhat,
                        const LossCfg& cfg);

// ce_mean + eta * module_loss.
double combined_loss(double ce_mean, double module_loss, double eta);

// d(loss_module_loss)/d(lhat_i). The targets l are treated as constants.
// At the hinge edge and at the dead-zone edge the subgradient 0 is used.
std::vector<double> loss_module_grad(std::span<const double> l,
                                     std::span<const double> lhat,
                                     const LossCfg& cfg);

}  // namespace tplab
