#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tplab/nnet.hpp"
#include "tplab/rng.hpp"
#include "tplab/types.hpp"

namespace tplab {

enum class StrategyId { random, losslearn, tpl, entropy, bald, aled, coreset, badge, batchbald };

StrategyId strategy_from_string(const std::string& name);
std::string strategy_name(StrategyId id);
// True for strategies that can score a drive frame by frame in a single pass.
bool is_stream_capable(StrategyId id);

struct QueryCfg {
    int mc_passes = 10;
    double sieve_epsilon = 0.1;
    enum class Bandwidth { median_heuristic, fixed };
    Bandwidth bandwidth_mode = Bandwidth::median_heuristic;
    double bandwidth = 1.0;  // used when bandwidth_mode == fixed
    enum class TplMode { abs_derivative, positive_slope };
    TplMode tpl_mode = TplMode::abs_derivative;
    int batchbald_samples = 10000;
    int batchbald_exact_limit = 4096;

    void validate() const;
};

// ==================== information scores ====================

// Shannon entropy of one distribution; zero-probability terms contribute 0.
double entropy_of(std::span<const double> probs);
// Entropy of the mean distribution over sampled forward passes.
double entropy_of_mean(const std::vector<std::vector<double>>& probs);
// Mutual information H(mean) - mean(H), clamped at zero. Shared by the bald
// strategy and the first batchbald pick so a size-1 batch is bit-identical.
double bald_of(const std::vector<std::vector<double>>& probs);

// ==================== streaming protocol ====================

struct ScoredFrame {
    std::size_t index;
    double t;
    double score;
};

// Scores a drive one frame at a time. feed() may buffer: scores whose value
// depends on a later frame are emitted once that frame arrives. finish()
// flushes whatever is still buffered.
class StreamScorer {
  public:
    virtual ~StreamScorer() = default;
    virtual std::vector<ScoredFrame> feed(std::size_t index, const Frame& frame) = 0;
    virtual std::vector<ScoredFrame> finish() = 0;
};

std::unique_ptr<StreamScorer> make_stream_scorer(StrategyId id, const Model& m,
                                                 const QueryCfg& cfg, Rng rng);

struct AccessCounter {
    std::uint64_t frames_fed = 0;
};

// Single pass over the drive keeping the b best frames (score desc, then
// earlier timestamp). Returned indices are sorted ascending.
std::vector<std::size_t> stream_select_top_b(StreamScorer& scorer, const Drive& drive,
                                             std::size_t b, AccessCounter* counter = nullptr);

// ==================== submodular streaming (aled) ====================

// f(S) = 0.5 * logdet(I + K_S) with a normalized RBF kernel, computed densely.
// Reference implementation used by tests and for invariant checks.
double logdet_objective(const std::vector<std::vector<double>>& points,
                        std::span<const std::size_t> idx, double bandwidth);

// Median of pairwise euclidean distances over a deterministic subsample
// (at most 1024 points). Falls back to 1.0 when the median is zero.
double median_heuristic_bandwidth(const std::vector<std::vector<double>>& points, Rng rng);

// Sieve-Streaming++ maximizing f(S) = 0.5 * logdet(I + K_S) under |S| <= budget.
// Thresholds (1+eps)^j cover [m, 2*budget*m] where m = f of any singleton
// (constant 0.5*ln 2 for the normalized RBF). Each sieve keeps an incremental
// Cholesky factor of I + K_S so a marginal gain costs O(|S|^2).
class SievePP {
  public:
    SievePP(std::size_t budget, double epsilon, double bandwidth);

    void offer(std::size_t index, std::span<const double> z);
    std::vector<std::size_t> best_set() const;  // argmax f over sieves
    double best_value() const;
    std::size_t n_sieves() const { return sieves_.size(); }

  private:
    struct Sieve {
        double tau;
        std::vector<std::size_t> idx;
        std::vector<std::vector<double>> pts;
        std::vector<double> chol;  // packed lower triangle of I + K
        double f = 0.0;
    };
    double marginal_gain(const Sieve& s, std::span<const double> z,
                         std::vector<double>& u) const;
    void extend(Sieve& s, std::size_t index, std::span<const double> z,
                const std::vector<double>& u);

    std::size_t budget_;
    double bandwidth_;
    std::vector<Sieve> sieves_;
};

// ==================== pool strategies ====================

// Uniform random b-subset via partial Fisher-Yates; returned in draw order.
std::vector<std::size_t> random_select(std::size_t n, std::size_t b, Rng& rng);

// Greedy k-center (farthest-first traversal), a 2-approximation of the optimal
// covering radius. `centers` seeds the traversal (may be empty); picks b
// candidate indices. Distance ties resolve to the lowest index.
std::vector<std::size_t> coreset_kcenter(const std::vector<std::vector<double>>& candidates,
                                         const std::vector<std::vector<double>>& centers,
                                         std::size_t b);

// Gradient of the sample's cross entropy at its own argmax label with respect
// to the final classifier layer: (softmax - onehot(argmax)) outer latent.
std::vector<double> badge_embedding(const Model& m, std::span<const double> x);

// k-means++ seeding over embeddings: first pick uniform, later picks with
// probability proportional to squared distance to the nearest pick.
std::vector<std::size_t> kmeanspp_select(const std::vector<std::vector<double>>& embeddings,
                                         std::size_t b, Rng& rng);

// Greedy batch mutual information from per-candidate sampled predictions
// P[i][t][c]. Exact joint entropy while C^k <= exact_limit, then Monte Carlo
// with mc_samples configurations. First pick maximizes bald_of.
std::vector<std::size_t> batchbald_from_samples(
    const std::vector<std::vector<std::vector<double>>>& p, std::size_t b, int exact_limit,
    int mc_samples, Rng rng);

// Kernel bandwidth for aled, derived from the labeled set's latents so a
// single-pass stream never needs to see a frame before scoring it.
double aled_bandwidth(const Model& m, const FrameSet& labeled, const QueryCfg& cfg, Rng rng);

// Single-pass aled over one drive: one forward per frame feeds the sieve.
// Pads from the earliest unchosen frames if the sieve returns fewer than b.
std::vector<std::size_t> aled_select_stream(const Model& m, const Drive& drive, std::size_t b,
                                            double bandwidth, const QueryCfg& cfg,
                                            AccessCounter* counter = nullptr);

// ==================== pool entry point ====================

// Selects b unlabeled frames from the accumulated pool. `taken[d][i]` marks
// frames already labeled. `labeled` seeds distance-based strategies.
std::vector<FrameRef> pool_select(StrategyId id, const Model& m, std::span<const Drive> pool,
                                  const std::vector<std::vector<char>>& taken,
                                  const FrameSet& labeled, std::size_t b, const QueryCfg& cfg,
                                  Rng rng);

// Per-frame tpl scores for one drive: absolute (or positive-part) backward
// difference of the predicted loss over time. Frame 0 inherits frame 1's
// score; a single-frame drive scores 0.
std::vector<double> tpl_scores_of_drive(const Model& m, const Drive& drive,
                                        QueryCfg::TplMode mode);

}  // namespace tplab
