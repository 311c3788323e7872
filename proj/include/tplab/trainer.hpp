#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "tplab/nnet.hpp"
#include "tplab/objective.hpp"
#include "tplab/types.hpp"

namespace tplab {

// When the loss-module gradient stops flowing into the backbone.
//   two_phase_early_stop: joint training until validation patience expires,
//     then restore the best checkpoint, detach, and train until it expires again.
//   never: same two patience windows, gradient always flows.
//   fixed_epoch: detach from the given epoch onward, same two windows.
struct DetachSchedule {
    enum class Kind { two_phase_early_stop, never, fixed_epoch };
    Kind kind = Kind::two_phase_early_stop;
    int epoch = 0;

    static DetachSchedule two_phase() { return {Kind::two_phase_early_stop, 0}; }
    static DetachSchedule never() { return {Kind::never, 0}; }
    static DetachSchedule fixed(int e) { return {Kind::fixed_epoch, e}; }
};

struct TrainCfg {
    int batch_size = 64;  // must be even: the ranking term consumes pairs
    double lr = 0.001;
    double momentum = 0.9;
    int patience = 30;
    int max_epochs = 500;
    DetachSchedule detach = DetachSchedule::two_phase();
    LossCfg loss;
    std::uint64_t seed = 1;

    void validate() const;
};

// Counts epochs since the last strict improvement; >= patience means expired.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // Returns true when `value` strictly improves on the best seen so far.
    bool observe(double value) {
        if (value > best_) {
            best_ = value;
            wait_ = 0;
            return true;
        }
        ++wait_;
        return false;
    }

    bool expired() const { return wait_ >= patience_; }
    double best() const { return best_; }
    void reset_wait() { wait_ = 0; }

  private:
    int patience_;
    int wait_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    int phase = 1;  // 1 = joint, 2 = after the first patience expiry
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    double best_val_acc = 0.0;
    int best_epoch = -1;
    int detach_epoch = -1;  // -1 when the gradient was never detached
};

// Fraction of frames whose argmax logit matches the label (ties -> lowest index).
double evaluate_accuracy(const Model& m, const FrameSet& data);

// Two-phase early-stopped SGD. Mutates `m` in place; on return `m` holds the
// parameters of the globally best validation checkpoint.
TrainHistory train_model(Model& m, const FrameSet& train, const FrameSet& val,
                         const TrainCfg& cfg);

void save_history_csv(const TrainHistory& h, const std::filesystem::path& path);

}  // namespace tplab
