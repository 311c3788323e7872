#include "tplab/query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tplab/errors.hpp"
#include "tplab/kernels.hpp"
#include "tplab/objective.hpp"

namespace tplab {

// ==================== strategy ids ====================

namespace {

struct StrategyRow {
    StrategyId id;
    const char* name;
    bool stream;
};

constexpr StrategyRow kStrategies[] = {
    {StrategyId::random, "random", true},   {StrategyId::losslearn, "losslearn", true},
    {StrategyId::tpl, "tpl", true},         {StrategyId::entropy, "entropy", true},
    {StrategyId::bald, "bald", true},       {StrategyId::aled, "aled", true},
    {StrategyId::coreset, "coreset", false}, {StrategyId::badge, "badge", false},
    {StrategyId::batchbald, "batchbald", false},
};

}  // namespace

StrategyId strategy_from_string(const std::string& name) {
    for (const StrategyRow& row : kStrategies)
        if (name == row.name) return row.id;
    std::string valid;
    for (const StrategyRow& row : kStrategies) {
        if (!valid.empty()) valid += ", ";
        valid += row.name;
    }
    throw ConfigError("unknown strategy '" + name + "' (valid: " + valid + ")");
}

std::string strategy_name(StrategyId id) {
    for (const StrategyRow& row : kStrategies)
        if (id == row.id) return row.name;
    throw ConfigError("unknown strategy id");
}

bool is_stream_capable(StrategyId id) {
    for (const StrategyRow& row : kStrategies)
        if (id == row.id) return row.stream;
    throw ConfigError("unknown strategy id");
}

void QueryCfg::validate() const {
    if (mc_passes < 1) throw ConfigError("query.mc_passes must be >= 1");
    if (!(sieve_epsilon > 0.0) || sieve_epsilon >= 1.0)
        throw ConfigError("query.sieve_epsilon must be in (0, 1)");
    if (bandwidth_mode == Bandwidth::fixed && !(bandwidth > 0.0))
        throw ConfigError("query.bandwidth must be > 0");
    if (batchbald_samples < 1) throw ConfigError("query.batchbald_samples must be >= 1");
    if (batchbald_exact_limit < 1) throw ConfigError("query.batchbald_exact_limit must be >= 1");
}

// ==================== information scores ====================

double entropy_of(std::span<const double> probs) {
    double h = 0.0;
    for (const double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double entropy_of_mean(const std::vector<std::vector<double>>& probs) {
    if (probs.empty()) throw ConfigError("entropy_of_mean: no samples");
    std::vector<double> mean(probs[0].size(), 0.0);
    for (const std::vector<double>& row : probs) {
        if (row.size() != mean.size()) throw ConfigError("entropy_of_mean: ragged samples");
        kern::axpy(1.0, row.data(), mean.data(), mean.size());
    }
    kern::scale(1.0 / static_cast<double>(probs.size()), mean.data(), mean.size());
    return entropy_of(mean);
}

double bald_of(const std::vector<std::vector<double>>& probs) {
    double mean_h = 0.0;
    for (const std::vector<double>& row : probs) mean_h += entropy_of(row);
    mean_h /= static_cast<double>(probs.size());
    return std::max(0.0, entropy_of_mean(probs) - mean_h);
}

// ==================== stream scorers ====================

namespace {

class RandomScorer final : public StreamScorer {
  public:
    explicit RandomScorer(Rng rng) : rng_(rng) {}
    std::vector<ScoredFrame> feed(std::size_t index, const Frame& f) override {
        return {{index, f.t, rng_.uniform01()}};
    }
    std::vector<ScoredFrame> finish() override { return {}; }

  private:
    Rng rng_;
};

class LossLearnScorer final : public StreamScorer {
  public:
    explicit LossLearnScorer(const Model& m) : m_(m) {}
    std::vector<ScoredFrame> feed(std::size_t index, const Frame& f) override {
        return {{index, f.t, forward_eval(m_, f.x).predicted_loss}};
    }
    std::vector<ScoredFrame> finish() override { return {}; }

  private:
    const Model& m_;
};

double tpl_of_slope(double slope, QueryCfg::TplMode mode) {
    return mode == QueryCfg::TplMode::abs_derivative ? std::abs(slope) : std::max(slope, 0.0);
}

class TplScorer final : public StreamScorer {
  public:
    TplScorer(const Model& m, QueryCfg::TplMode mode) : m_(m), mode_(mode) {}

    std::vector<ScoredFrame> feed(std::size_t index, const Frame& f) override {
        // Differences the bias-free output so adding a constant to the
        // predicted loss cannot change the score, bit for bit.
        const double lin = forward_eval(m_, f.x).predicted_loss_linear;
        std::vector<ScoredFrame> out;
        if (!has_prev_) {
            has_prev_ = true;
            first_pending_ = true;
            first_index_ = index;
            first_t_ = f.t;
        } else {
            const double dt = f.t - prev_t_;
            if (!(dt > 0.0))
                throw NumericError("non-increasing timestamp at frame " + std::to_string(index));
            const double s = tpl_of_slope((lin - prev_lin_) / dt, mode_);
            if (first_pending_) {
                out.push_back({first_index_, first_t_, s});  // frame 0 inherits frame 1's score
                first_pending_ = false;
            }
            out.push_back({index, f.t, s});
        }
        prev_lin_ = lin;
        prev_t_ = f.t;
        return out;
    }

    std::vector<ScoredFrame> finish() override {
        if (first_pending_) {
            first_pending_ = false;
            return {{first_index_, first_t_, 0.0}};  // single-frame drive
        }
        return {};
    }

  private:
    const Model& m_;
    QueryCfg::TplMode mode_;
    bool has_prev_ = false;
    bool first_pending_ = false;
    std::size_t first_index_ = 0;
    double first_t_ = 0.0;
    double prev_lin_ = 0.0;
    double prev_t_ = 0.0;
};

class McScorer final : public StreamScorer {
  public:
    McScorer(const Model& m, int passes, bool mutual_info, Rng rng)
        : m_(m), passes_(passes), mutual_info_(mutual_info), rng_(rng) {}

    std::vector<ScoredFrame> feed(std::size_t index, const Frame& f) override {
        const auto probs = mc_predict(m_, f.x, passes_, rng_);
        const double s = mutual_info_ ? bald_of(probs) : entropy_of_mean(probs);
        return {{index, f.t, s}};
    }
    std::vector<ScoredFrame> finish() override { return {}; }

  private:
    const Model& m_;
    int passes_;
    bool mutual_info_;
    Rng rng_;
};

}  // namespace

std::unique_ptr<StreamScorer> make_stream_scorer(StrategyId id, const Model& m,
                                                 const QueryCfg& cfg, Rng rng) {
    cfg.validate();
    switch (id) {
        case StrategyId::random: return std::make_unique<RandomScorer>(rng);
        case StrategyId::losslearn: return std::make_unique<LossLearnScorer>(m);
        case StrategyId::tpl: return std::make_unique<TplScorer>(m, cfg.tpl_mode);
        case StrategyId::entropy: return std::make_unique<McScorer>(m, cfg.mc_passes, false, rng);
        case StrategyId::bald: return std::make_unique<McScorer>(m, cfg.mc_passes, true, rng);
        default:
            throw ConfigError("strategy '" + strategy_name(id) +
                              "' cannot score a stream frame by frame");
    }
}

namespace {

// a should be kept over b: higher score, then earlier time, then lower index.
bool frame_better(const ScoredFrame& a, const ScoredFrame& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.t != b.t) return a.t < b.t;
    return a.index < b.index;
}

}  // namespace

std::vector<std::size_t> stream_select_top_b(StreamScorer& scorer, const Drive& drive,
                                             std::size_t b, AccessCounter* counter) {
    std::vector<ScoredFrame> kept;  // min-heap, worst kept frame on top
    const auto cmp = frame_better;  // "better" acts as less-than so the top is the worst
    std::size_t emitted = 0;
    const auto consume = [&](std::vector<ScoredFrame>&& scored) {
        for (const ScoredFrame& sf : scored) {
            ++emitted;
            if (kept.size() < b) {
                kept.push_back(sf);
                std::push_heap(kept.begin(), kept.end(), cmp);
            } else if (b > 0 && frame_better(sf, kept.front())) {
                std::pop_heap(kept.begin(), kept.end(), cmp);
                kept.back() = sf;
                std::push_heap(kept.begin(), kept.end(), cmp);
            }
        }
    };
    for (std::size_t i = 0; i < drive.frames.size(); ++i) {
        if (counter) ++counter->frames_fed;
        consume(scorer.feed(i, drive.frames[i]));
    }
    consume(scorer.finish());
    if (emitted != drive.frames.size())
        throw NumericError("stream scorer emitted " + std::to_string(emitted) + " scores for " +
                           std::to_string(drive.frames.size()) + " frames");
    std::vector<std::size_t> out;
    out.reserve(kept.size());
    for (const ScoredFrame& sf : kept) out.push_back(sf.index);
    std::sort(out.begin(), out.end());
    return out;
}

// ==================== submodular streaming (aled) ====================

namespace {

double rbf(std::span<const double> a, std::span<const double> b, double h) {
    return std::exp(-kern::sq_dist(a.data(), b.data(), a.size()) / (2.0 * h * h));
}

}  // namespace

double logdet_objective(const std::vector<std::vector<double>>& points,
                        std::span<const std::size_t> idx, double bandwidth) {
    const std::size_t n = idx.size();
    if (n == 0) return 0.0;
    std::vector<double> g(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            g[i * n + j] = (i == j ? 1.0 : 0.0) + rbf(points[idx[i]], points[idx[j]], bandwidth);
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::vector<double> a = g;
        if (attempt == 1)
            for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1e-9;
        double logdet = 0.0;
        bool ok = true;
        // in-place Cholesky, lower triangle
        for (std::size_t i = 0; i < n && ok; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = a[i * n + j] - kern::dot(&a[i * n], &a[j * n], j);
                if (i == j) {
                    if (!(s > 0.0)) {
                        ok = false;
                        break;
                    }
                    a[i * n + i] = std::sqrt(s);
                    logdet += std::log(s);
                } else {
                    a[i * n + j] = s / a[j * n + j];
                }
            }
        }
        if (ok) return 0.5 * logdet;
    }
    throw NumericError("kernel matrix is not positive definite");
}

double median_heuristic_bandwidth(const std::vector<std::vector<double>>& points, Rng rng) {
    const std::size_t n = points.size();
    if (n < 2) return 1.0;
    constexpr std::size_t kMaxSample = 1024;
    std::vector<std::size_t> pick(n);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    const std::size_t m = std::min(n, kMaxSample);
    for (std::size_t i = 0; i < m; ++i)
        std::swap(pick[i], pick[i + rng.uniform_below(n - i)]);
    std::vector<double> dists;
    dists.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            dists.push_back(std::sqrt(kern::sq_dist(points[pick[i]].data(), points[pick[j]].data(),
                                                    points[pick[i]].size())));
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    const double med = dists[dists.size() / 2];
    return med > 0.0 ? med : 1.0;
}

SievePP::SievePP(std::size_t budget, double epsilon, double bandwidth)
    : budget_(budget), bandwidth_(bandwidth) {
    if (budget < 1) throw ConfigError("sieve budget must be >= 1");
    if (!(epsilon > 0.0) || epsilon >= 1.0) throw ConfigError("sieve epsilon must be in (0, 1)");
    if (!(bandwidth > 0.0)) throw ConfigError("sieve bandwidth must be > 0");
    const double m0 = 0.5 * std::log(2.0);  // f of any singleton: k(z, z) = 1
    const double lg = std::log1p(epsilon);
    const int j_lo = static_cast<int>(std::ceil(std::log(m0) / lg - 1e-9));
    const int j_hi =
        static_cast<int>(std::floor(std::log(2.0 * static_cast<double>(budget) * m0) / lg + 1e-9));
    for (int j = j_lo; j <= j_hi; ++j)
        sieves_.push_back(Sieve{std::pow(1.0 + epsilon, j), {}, {}, {}, 0.0});
}

double SievePP::marginal_gain(const Sieve& s, std::span<const double> z,
                              std::vector<double>& u) const {
    const std::size_t n = s.idx.size();
    u.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = rbf(z, s.pts[i], bandwidth_);
        const std::size_t base = i * (i + 1) / 2;
        u[i] = (c - kern::dot(&s.chol[base], u.data(), i)) / s.chol[base + i];
    }
    double d2 = 2.0 - kern::dot(u.data(), u.data(), n);
    if (d2 < 0.5) throw NumericError("sieve kernel factor lost positive definiteness");
    d2 = std::clamp(d2, 1.0, 2.0);
    return 0.5 * std::log(d2);
}

void SievePP::extend(Sieve& s, std::size_t index, std::span<const double> z,
                     const std::vector<double>& u) {
    double d2 = 2.0 - kern::dot(u.data(), u.data(), u.size());
    d2 = std::clamp(d2, 1.0, 2.0);
    s.chol.insert(s.chol.end(), u.begin(), u.end());
    s.chol.push_back(std::sqrt(d2));
    s.pts.emplace_back(z.begin(), z.end());
    s.idx.push_back(index);
    s.f += 0.5 * std::log(d2);
}

void SievePP::offer(std::size_t index, std::span<const double> z) {
    std::vector<double> u;
    for (Sieve& s : sieves_) {
        const std::size_t size = s.idx.size();
        if (size >= budget_) continue;
        const double gain = marginal_gain(s, z, u);
        const double need = (s.tau / 2.0 - s.f) / static_cast<double>(budget_ - size);
        if (gain >= need) extend(s, index, z, u);
    }
}

std::vector<std::size_t> SievePP::best_set() const {
    const Sieve* best = nullptr;
    for (const Sieve& s : sieves_)
        if (!best || s.f > best->f) best = &s;
    if (!best) return {};
    std::vector<std::size_t> out = best->idx;
    std::sort(out.begin(), out.end());
    return out;
}

double SievePP::best_value() const {
    double best = 0.0;
    for (const Sieve& s : sieves_) best = std::max(best, s.f);
    return best;
}

// ==================== pool strategies ====================

std::vector<std::size_t> random_select(std::size_t n, std::size_t b, Rng& rng) {
    b = std::min(b, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < b; ++i)
        std::swap(order[i], order[i + rng.uniform_below(n - i)]);
    order.resize(b);
    return order;
}

std::vector<std::size_t> coreset_kcenter(const std::vector<std::vector<double>>& candidates,
                                         const std::vector<std::vector<double>>& centers,
                                         std::size_t b) {
    const std::size_t n = candidates.size();
    b = std::min(b, n);
    constexpr double kPicked = -1.0;
    std::vector<double> dmin(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        for (const std::vector<double>& c : centers)
            dmin[i] = std::min(dmin[i],
                               kern::sq_dist(candidates[i].data(), c.data(), candidates[i].size()));
    std::vector<std::size_t> picks;
    picks.reserve(b);
    for (std::size_t t = 0; t < b; ++t) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i)
            if (dmin[i] != kPicked && (best == n || dmin[i] > dmin[best])) best = i;
        picks.push_back(best);
        const std::vector<double>& z = candidates[best];
        dmin[best] = kPicked;
        for (std::size_t i = 0; i < n; ++i)
            if (dmin[i] != kPicked)
                dmin[i] = std::min(dmin[i], kern::sq_dist(candidates[i].data(), z.data(), z.size()));
    }
    return picks;
}

std::vector<double> badge_embedding(const Model& m, std::span<const double> x) {
    const ForwardTrace tr = forward_eval(m, x);
    std::vector<double> p(tr.logits.size());
    softmax(tr.logits, p);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < tr.logits.size(); ++c)
        if (tr.logits[c] > tr.logits[arg]) arg = c;
    p[arg] -= 1.0;
    const std::vector<double>& latent = tr.latent();
    std::vector<double> emb(p.size() * latent.size());
    for (std::size_t c = 0; c < p.size(); ++c)
        for (std::size_t u = 0; u < latent.size(); ++u) emb[c * latent.size() + u] = p[c] * latent[u];
    return emb;
}

std::vector<std::size_t> kmeanspp_select(const std::vector<std::vector<double>>& embeddings,
                                         std::size_t b, Rng& rng) {
    const std::size_t n = embeddings.size();
    b = std::min(b, n);
    if (b == 0) return {};
    std::vector<std::size_t> picks;
    picks.reserve(b);
    std::vector<char> taken(n, 0);
    const std::size_t first = rng.uniform_below(n);
    picks.push_back(first);
    taken[first] = 1;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
        d2[i] = i == first ? 0.0
                           : kern::sq_dist(embeddings[i].data(), embeddings[first].data(),
                                           embeddings[i].size());
    while (picks.size() < b) {
        const double total = kern::sum(d2.data(), n);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform01() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)  // fp slack: fall back to the last positive mass
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
        }
        if (pick == n)  // every remaining point duplicates a pick
            for (std::size_t i = 0; i < n; ++i)
                if (!taken[i]) {
                    pick = i;
                    break;
                }
        picks.push_back(pick);
        taken[pick] = 1;
        d2[pick] = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (d2[i] > 0.0)
                d2[i] = std::min(d2[i], kern::sq_dist(embeddings[i].data(), embeddings[pick].data(),
                                                      embeddings[i].size()));
    }
    return picks;
}

// ==================== batchbald ====================

namespace {

int sample_class(std::span<const double> probs, Rng& rng) {
    const double r = rng.uniform01();
    double acc = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        acc += probs[c];
        if (r < acc) return static_cast<int>(c);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

std::vector<std::size_t> batchbald_from_samples(
    const std::vector<std::vector<std::vector<double>>>& p, std::size_t b, int exact_limit,
    int mc_samples, Rng rng) {
    const std::size_t n = p.size();
    b = std::min(b, n);
    if (b == 0) return {};
    const std::size_t t_passes = p[0].size();
    if (t_passes == 0) throw ConfigError("batchbald: no sampled passes");
    const std::size_t n_classes = p[0][0].size();
    if (n_classes < 2) throw ConfigError("batchbald: need at least 2 classes");
    for (const auto& cand : p) {
        if (cand.size() != t_passes) throw ConfigError("batchbald: ragged pass counts");
        for (const auto& row : cand)
            if (row.size() != n_classes) throw ConfigError("batchbald: ragged class counts");
    }
    if (exact_limit < 1) throw ConfigError("batchbald: exact_limit must be >= 1");
    if (mc_samples < 1) throw ConfigError("batchbald: mc_samples must be >= 1");

    const double t_d = static_cast<double>(t_passes);
    std::vector<double> cond_ent(n);
    std::vector<double> stale(n);  // last known marginal gain, seeded by the size-1 score
    for (std::size_t i = 0; i < n; ++i) {
        double h = 0.0;
        for (const auto& row : p[i]) h += entropy_of(row);
        cond_ent[i] = h / t_d;
        stale[i] = bald_of(p[i]);
    }

    std::vector<std::size_t> chosen;
    std::vector<char> in_batch(n, 0);
    std::vector<std::vector<std::vector<double>>> logp_chosen;  // per chosen: T x C
    const auto accept = [&](std::size_t i) {
        chosen.push_back(i);
        in_batch[i] = 1;
        std::vector<std::vector<double>> lp(t_passes, std::vector<double>(n_classes));
        for (std::size_t t = 0; t < t_passes; ++t)
            for (std::size_t c = 0; c < n_classes; ++c) lp[t][c] = std::log(p[i][t][c]);
        logp_chosen.push_back(std::move(lp));
    };

    std::size_t first = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (stale[i] > stale[first]) first = i;
    accept(first);

    // Exact joint distribution while it fits: J[t][q] over class configurations.
    bool exact_alive = true;
    std::size_t joint_size = n_classes;
    std::vector<std::vector<double>> joint(t_passes, std::vector<double>(n_classes));
    for (std::size_t t = 0; t < t_passes; ++t)
        for (std::size_t c = 0; c < n_classes; ++c) joint[t][c] = p[first][t][c];

    std::vector<double> tmp;
    while (chosen.size() < b) {
        const bool exact_step =
            exact_alive && joint_size <= static_cast<std::size_t>(exact_limit) / n_classes;
        if (exact_step) {
            const std::size_t joint_next = joint_size * n_classes;
            // H of the current batch, and then of batch + candidate.
            double h_s = 0.0;
            tmp.assign(joint_size, 0.0);
            for (std::size_t t = 0; t < t_passes; ++t)
                kern::axpy(1.0, joint[t].data(), tmp.data(), joint_size);
            for (std::size_t q = 0; q < joint_size; ++q)
                if (tmp[q] > 0.0) {
                    const double pm = tmp[q] / t_d;
                    h_s -= pm * std::log(pm);
                }
            std::size_t best = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (in_batch[i]) continue;
                tmp.assign(joint_next, 0.0);
                for (std::size_t t = 0; t < t_passes; ++t) {
                    const std::vector<double>& jt = joint[t];
                    const std::vector<double>& pi = p[i][t];
                    for (std::size_t q = 0; q < joint_size; ++q) {
                        const double jq = jt[q];
                        if (!(jq > 0.0)) continue;
                        double* row = &tmp[q * n_classes];
                        kern::axpy(jq, pi.data(), row, n_classes);
                    }
                }
                double h = 0.0;
                for (std::size_t q = 0; q < joint_next; ++q)
                    if (tmp[q] > 0.0) {
                        const double pm = tmp[q] / t_d;
                        h -= pm * std::log(pm);
                    }
                stale[i] = h - h_s - cond_ent[i];
                if (best == n || stale[i] > stale[best]) best = i;
            }
            // fold the winner into the joint
            std::vector<std::vector<double>> next(t_passes, std::vector<double>(joint_next));
            for (std::size_t t = 0; t < t_passes; ++t)
                for (std::size_t q = 0; q < joint_size; ++q) {
                    const double jq = joint[t][q];
                    for (std::size_t c = 0; c < n_classes; ++c)
                        next[t][q * n_classes + c] = jq * p[best][t][c];
                }
            joint = std::move(next);
            joint_size = joint_next;
            accept(best);
            continue;
        }

        exact_alive = false;
        joint.clear();
        // Monte Carlo: sample configurations of the current batch, then score
        // candidates lazily against the shared per-step weights.
        const std::size_t m_samples = static_cast<std::size_t>(mc_samples);
        const std::size_t k = chosen.size();
        std::vector<double> w(m_samples * t_passes);  // normalized per-pass weights
        std::vector<double> k_max(m_samples), z_sum(m_samples);
        double h_s = 0.0;
        std::vector<int> cls(k);
        std::vector<double> logw(t_passes);
        for (std::size_t m = 0; m < m_samples; ++m) {
            const std::size_t tm = rng.uniform_below(t_passes);
            for (std::size_t j = 0; j < k; ++j) cls[j] = sample_class(p[chosen[j]][tm], rng);
            for (std::size_t t = 0; t < t_passes; ++t) {
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j)
                    acc += logp_chosen[j][t][static_cast<std::size_t>(cls[j])];
                logw[t] = acc;
            }
            const double km = *std::max_element(logw.begin(), logw.end());
            double z = 0.0;
            for (std::size_t t = 0; t < t_passes; ++t) {
                const double wt = std::exp(logw[t] - km);
                w[m * t_passes + t] = wt;
                z += wt;
            }
            k_max[m] = km;
            z_sum[m] = z;
            h_s -= km + std::log(z / t_d);
        }
        h_s /= static_cast<double>(m_samples);

        std::vector<double> s_c(n_classes);
        const auto eval = [&](std::size_t i) {
            double h = 0.0;
            for (std::size_t m = 0; m < m_samples; ++m) {
                std::fill(s_c.begin(), s_c.end(), 0.0);
                const double* wm = &w[m * t_passes];
                for (std::size_t t = 0; t < t_passes; ++t) {
                    if (wm[t] == 0.0) continue;
                    kern::axpy(wm[t], p[i][t].data(), s_c.data(), n_classes);
                }
                for (std::size_t c = 0; c < n_classes; ++c)
                    if (s_c[c] > 0.0)
                        h -= s_c[c] / z_sum[m] * (k_max[m] + std::log(s_c[c] / t_d));
            }
            return h / static_cast<double>(m_samples) - h_s - cond_ent[i];
        };

        // lazy greedy: pop the best stale bound, refresh it, accept when it
        // still dominates the rest
        using Entry = std::pair<double, std::size_t>;
        const auto entry_less = [](const Entry& a, const Entry& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second > b.second;
        };
        std::vector<Entry> heap;
        heap.reserve(n - chosen.size());
        for (std::size_t i = 0; i < n; ++i)
            if (!in_batch[i]) heap.push_back({stale[i], i});
        std::make_heap(heap.begin(), heap.end(), entry_less);
        std::vector<char> fresh(n, 0);
        while (true) {
            std::pop_heap(heap.begin(), heap.end(), entry_less);
            const Entry top = heap.back();
            heap.pop_back();
            if (fresh[top.second]) {
                accept(top.second);
                break;
            }
            const double now = eval(top.second);
            stale[top.second] = now;
            fresh[top.second] = 1;
            if (heap.empty() || now >= heap.front().first) {
                accept(top.second);
                break;
            }
            heap.push_back({now, top.second});
            std::push_heap(heap.begin(), heap.end(), entry_less);
        }
    }
    return chosen;
}

// ==================== tpl / aled entry points ====================

std::vector<double> tpl_scores_of_drive(const Model& m, const Drive& drive,
                                        QueryCfg::TplMode mode) {
    const std::size_t n = drive.frames.size();
    std::vector<double> scores(n, 0.0);
    if (n == 0) return scores;
    double prev_lin = forward_eval(m, drive.frames[0].x).predicted_loss_linear;
    double prev_t = drive.frames[0].t;
    for (std::size_t i = 1; i < n; ++i) {
        const Frame& f = drive.frames[i];
        const double lin = forward_eval(m, f.x).predicted_loss_linear;
        const double dt = f.t - prev_t;
        if (!(dt > 0.0))
            throw NumericError("drive '" + drive.id + "': non-increasing timestamp at frame " +
                               std::to_string(i));
        scores[i] = tpl_of_slope((lin - prev_lin) / dt, mode);
        if (i == 1) scores[0] = scores[1];
        prev_lin = lin;
        prev_t = f.t;
    }
    return scores;
}

double aled_bandwidth(const Model& m, const FrameSet& labeled, const QueryCfg& cfg, Rng rng) {
    if (cfg.bandwidth_mode == QueryCfg::Bandwidth::fixed) return cfg.bandwidth;
    std::vector<std::vector<double>> latents;
    latents.reserve(labeled.size());
    for (std::size_t i = 0; i < labeled.size(); ++i)
        latents.push_back(latent_of(m, {labeled.x(i), labeled.dim}));
    return median_heuristic_bandwidth(latents, rng);
}

namespace {

// The sieve may return fewer than b elements; pad with the earliest unchosen
// candidates so every strategy labels exactly its budget.
std::vector<std::size_t> pad_to_budget(std::vector<std::size_t> picked, std::size_t n,
                                       std::size_t b) {
    if (picked.size() >= b) return picked;
    std::vector<char> used(n, 0);
    for (const std::size_t i : picked) used[i] = 1;
    for (std::size_t i = 0; i < n && picked.size() < b; ++i)
        if (!used[i]) picked.push_back(i);
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

std::vector<std::size_t> aled_select_stream(const Model& m, const Drive& drive, std::size_t b,
                                            double bandwidth, const QueryCfg& cfg,
                                            AccessCounter* counter) {
    const std::size_t n = drive.frames.size();
    b = std::min(b, n);
    if (b == 0) return {};
    SievePP sieve(b, cfg.sieve_epsilon, bandwidth);
    for (std::size_t i = 0; i < n; ++i) {
        if (counter) ++counter->frames_fed;
        sieve.offer(i, latent_of(m, drive.frames[i].x));
    }
    return pad_to_budget(sieve.best_set(), n, b);
}

// ==================== pool entry point ====================

namespace {

struct Cand {
    std::size_t d, i;
};

std::vector<std::size_t> top_b_by_score(const std::vector<double>& scores, std::size_t b) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
    order.resize(std::min(b, order.size()));
    return order;
}

}  // namespace

std::vector<FrameRef> pool_select(StrategyId id, const Model& m, std::span<const Drive> pool,
                                  const std::vector<std::vector<char>>& taken,
                                  const FrameSet& labeled, std::size_t b, const QueryCfg& cfg,
                                  Rng rng) {
    cfg.validate();
    if (taken.size() != pool.size())
        throw ConfigError("pool_select: taken mask does not match pool drive count");
    std::vector<Cand> cands;
    for (std::size_t d = 0; d < pool.size(); ++d) {
        if (taken[d].size() != pool[d].frames.size())
            throw ConfigError("pool_select: taken mask does not match drive '" + pool[d].id + "'");
        for (std::size_t i = 0; i < pool[d].frames.size(); ++i)
            if (!taken[d][i]) cands.push_back({d, i});
    }
    const std::size_t n = cands.size();
    b = std::min(b, n);
    const auto to_refs = [&](const std::vector<std::size_t>& picks) {
        std::vector<FrameRef> refs;
        refs.reserve(picks.size());
        for (const std::size_t c : picks) refs.push_back({pool[cands[c].d].id, cands[c].i});
        return refs;
    };
    if (b == 0) return {};

    const auto frame_of = [&](std::size_t c) -> const Frame& {
        return pool[cands[c].d].frames[cands[c].i];
    };
    const auto candidate_latents = [&] {
        std::vector<std::vector<double>> out;
        out.reserve(n);
        for (std::size_t c = 0; c < n; ++c) out.push_back(latent_of(m, frame_of(c).x));
        return out;
    };
    const auto mc_probs_all = [&](Rng mc) {
        std::vector<std::vector<std::vector<double>>> out;
        out.reserve(n);
        for (std::size_t c = 0; c < n; ++c)
            out.push_back(mc_predict(m, frame_of(c).x, cfg.mc_passes, mc));
        return out;
    };

    switch (id) {
        case StrategyId::random: {
            Rng r = rng.split("random");
            return to_refs(random_select(n, b, r));
        }
        case StrategyId::losslearn: {
            std::vector<double> scores(n);
            for (std::size_t c = 0; c < n; ++c)
                scores[c] = forward_eval(m, frame_of(c).x).predicted_loss;
            return to_refs(top_b_by_score(scores, b));
        }
        case StrategyId::tpl: {
            std::vector<double> scores(n);
            std::size_t c = 0;
            for (std::size_t d = 0; d < pool.size(); ++d) {
                const std::vector<double> drive_scores = tpl_scores_of_drive(m, pool[d], cfg.tpl_mode);
                for (std::size_t i = 0; i < pool[d].frames.size(); ++i)
                    if (!taken[d][i]) scores[c++] = drive_scores[i];
            }
            return to_refs(top_b_by_score(scores, b));
        }
        case StrategyId::entropy:
        case StrategyId::bald: {
            Rng mc = rng.split("mc");
            std::vector<double> scores(n);
            for (std::size_t c = 0; c < n; ++c) {
                const auto probs = mc_predict(m, frame_of(c).x, cfg.mc_passes, mc);
                scores[c] = id == StrategyId::bald ? bald_of(probs) : entropy_of_mean(probs);
            }
            return to_refs(top_b_by_score(scores, b));
        }
        case StrategyId::aled: {
            const double h = aled_bandwidth(m, labeled, cfg, rng.split("bandwidth"));
            const auto latents = candidate_latents();
            SievePP sieve(b, cfg.sieve_epsilon, h);
            for (std::size_t c = 0; c < n; ++c) sieve.offer(c, latents[c]);
            return to_refs(pad_to_budget(sieve.best_set(), n, b));
        }
        case StrategyId::coreset: {
            const auto latents = candidate_latents();
            std::vector<std::vector<double>> centers;
            centers.reserve(labeled.size());
            for (std::size_t i = 0; i < labeled.size(); ++i)
                centers.push_back(latent_of(m, {labeled.x(i), labeled.dim}));
            return to_refs(coreset_kcenter(latents, centers, b));
        }
        case StrategyId::badge: {
            std::vector<std::vector<double>> emb;
            emb.reserve(n);
            for (std::size_t c = 0; c < n; ++c) emb.push_back(badge_embedding(m, frame_of(c).x));
            Rng r = rng.split("badge");
            return to_refs(kmeanspp_select(emb, b, r));
        }
        case StrategyId::batchbald: {
            const auto probs = mc_probs_all(rng.split("mc"));
            return to_refs(batchbald_from_samples(probs, b, cfg.batchbald_exact_limit,
                                                  cfg.batchbald_samples, rng.split("configs")));
        }
    }
    throw ConfigError("unknown strategy id");
}

}  // namespace tplab
