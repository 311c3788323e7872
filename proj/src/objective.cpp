#include "tplab/objective.hpp"

#include <cmath>
#include <string>

#include "tplab/errors.hpp"
#include "tplab/kernels.hpp"

namespace tplab {

void LossCfg::validate() const {
    if (!(xi >= 0.0) || !std::isfinite(xi)) throw ConfigError("loss_cfg.xi must be finite and >= 0");
    if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw ConfigError("loss_cfg.zeta must be finite and >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("loss_cfg.lambda must be finite and >= 0");
    if (!std::isfinite(eta) || eta < 0.0) throw ConfigError("loss_cfg.eta must be finite and >= 0");
}

double cross_entropy(std::span<const double> logits, int y) {
    if (logits.empty()) throw ConfigError("cross_entropy: empty logits");
    if (y < 0 || static_cast<std::size_t>(y) >= logits.size())
        throw ConfigError("cross_entropy: label " + std::to_string(y) + " out of range");
    const double m = kern::max_val(logits.data(), logits.size());
    double acc = 0.0;
    for (const double v : logits) acc += std::exp(v - m);
    return m + std::log(acc) - logits[static_cast<std::size_t>(y)];
}

void softmax(std::span<const double> logits, std::span<double> out) {
    const double m = kern::max_val(logits.data(), logits.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        acc += out[i];
    }
    kern::scale(1.0 / acc, out.data(), out.size());
}

double sign_star(double v) { return v > 0.0 ? 1.0 : -1.0; }

double l1_margin(double l, double lhat, double zeta, LossCfg::L1Mode mode) {
    const double d = std::fabs(l - lhat);
    if (d <= zeta) return 0.0;
    return mode == LossCfg::L1Mode::hard_threshold ? d : d - zeta;
}

namespace {

void check_pairable(std::size_t n) {
    if (n < 2 || n % 2 != 0)
        throw ConfigError("ranking loss needs an even batch of >= 2, got " + std::to_string(n));
}

}  // namespace

double ranking_loss(std::span<const double> l, std::span<const double> lhat,
                    double xi, LossCfg::RankSign mode) {
    check_pairable(l.size());
    if (l.size() != lhat.size()) throw ConfigError("ranking loss: size mismatch");
    const double flip = mode == LossCfg::RankSign::yoo_convention ? -1.0 : 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < l.size(); i += 2) {
        const double s = sign_star(l[i] - l[i + 1]);
        const double term = flip * s * (lhat[i] - lhat[i + 1]) + xi;
        if (term > 0.0) acc += term;
    }
    return 2.0 / static_cast<double>(l.size()) * acc;
}

double loss_module_loss(std::span<const double> l, std::span<const double> lhat,
                        const LossCfg& cfg) {
    double acc = ranking_loss(l, lhat, cfg.xi, cfg.ranking_sign_mode);
    double l1 = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i)
        l1 += l1_margin(l[i], lhat[i], cfg.zeta, cfg.l1_mode);
    return acc + cfg.lambda / static_cast<double>(l.size()) * l1;
}

double combined_loss(double ce_mean, double module_loss, double eta) {
    return ce_mean + eta * module_loss;
}

std::vector<double> loss_module_grad(std::span<const double> l,
                                     std::span<const double> lhat,
                                     const LossCfg& cfg) {
    check_pairable(l.size());
    if (l.size() != lhat.size()) throw ConfigError("ranking loss: size mismatch");
    const double n = static_cast<double>(l.size());
    const double flip = cfg.ranking_sign_mode == LossCfg::RankSign::yoo_convention ? -1.0 : 1.0;
    std::vector<double> g(l.size(), 0.0);
    for (std::size_t i = 0; i + 1 < l.size(); i += 2) {
        const double s = sign_star(l[i] - l[i + 1]);
        const double term = flip * s * (lhat[i] - lhat[i + 1]) + cfg.xi;
        if (term > 0.0) {
            const double d = 2.0 / n * flip * s;
            g[i] += d;
            g[i + 1] -= d;
        }
    }
    for (std::size_t i = 0; i < l.size(); ++i) {
        const double d = lhat[i] - l[i];
        if (std::fabs(d) > cfg.zeta)
            g[i] += cfg.lambda / n * (d > 0.0 ? 1.0 : -1.0);
    }
    return g;
}

}  // namespace tplab
