#include "tplab/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "tplab/decimal.hpp"
#include "tplab/errors.hpp"
#include "tplab/rng.hpp"

namespace tplab {

void TrainCfg::validate() const {
    if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
    if (batch_size % 2 != 0) throw ConfigError("train.batch_size must be even");
    if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
    if (!(momentum >= 0.0) || momentum >= 1.0) throw ConfigError("train.momentum must be in [0, 1)");
    if (patience < 1) throw ConfigError("train.patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (detach.kind == DetachSchedule::Kind::fixed_epoch && detach.epoch < 1)
        throw ConfigError("train.detach epoch must be >= 1");
    loss.validate();
}

double evaluate_accuracy(const Model& m, const FrameSet& data) {
    if (data.size() == 0) throw ConfigError("evaluate: data set is empty");
    if (data.dim != static_cast<std::size_t>(m.arch.input_dim))
        throw ConfigError("evaluate: data dim " + std::to_string(data.dim) +
                          " does not match arch input dim " + std::to_string(m.arch.input_dim));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ForwardTrace tr = forward_eval(m, {data.x(i), data.dim});
        std::size_t arg = 0;
        for (std::size_t c = 1; c < tr.logits.size(); ++c)
            if (tr.logits[c] > tr.logits[arg]) arg = c;
        if (static_cast<int>(arg) == data.ys[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainHistory train_model(Model& m, const FrameSet& train, const FrameSet& val,
                         const TrainCfg& cfg) {
    cfg.validate();
    if (train.size() < 2) throw ConfigError("training requires at least 2 labeled frames");
    if (train.dim != static_cast<std::size_t>(m.arch.input_dim))
        throw ConfigError("train: data dim " + std::to_string(train.dim) +
                          " does not match arch input dim " + std::to_string(m.arch.input_dim));

    Rng root(cfg.seed);
    EarlyStopper stopper(cfg.patience);
    TrainHistory hist;
    ParamSet best_params = m.params;
    ParamSet best_momentum = m.momentum;
    int phase = 1;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        bool detach = false;
        switch (cfg.detach.kind) {
            case DetachSchedule::Kind::two_phase_early_stop: detach = phase == 2; break;
            case DetachSchedule::Kind::never: detach = false; break;
            case DetachSchedule::Kind::fixed_epoch: detach = epoch >= cfg.detach.epoch; break;
        }
        if (detach && hist.detach_epoch < 0) hist.detach_epoch = epoch;

        Rng shuffle_rng = root.split("shuffle", static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        Rng mask_rng = root.split("dropout", static_cast<std::uint64_t>(epoch));

        double loss_sum = 0.0;
        int n_batches = 0;
        const std::size_t b = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t start = 0; start < order.size(); start += b) {
            std::size_t len = std::min(b, order.size() - start);
            if (len % 2 != 0) --len;  // ranking pairs need an even batch
            if (len < 2) continue;
            std::vector<DropoutMask> masks;
            masks.reserve(len);
            for (std::size_t i = 0; i < len; ++i) masks.push_back(sample_dropout(m.arch, mask_rng));
            BatchEval ev;
            const ParamSet g = batch_grad(m, train, {order.data() + start, len}, cfg.loss, masks,
                                          detach, &ev);
            sgd_step(m, g, cfg.lr, cfg.momentum);
            loss_sum += ev.value;
            ++n_batches;
        }
        if (n_batches == 0) throw ConfigError("training produced no usable batches");

        const double val_acc = evaluate_accuracy(m, val);
        if (stopper.observe(val_acc)) {
            best_params = m.params;
            best_momentum = m.momentum;
            hist.best_val_acc = val_acc;
            hist.best_epoch = epoch;
        }
        hist.epochs.push_back({epoch, loss_sum / n_batches, val_acc, phase});

        if (stopper.expired()) {
            if (phase == 1) {
                m.params = best_params;
                m.momentum = best_momentum;
                phase = 2;
                stopper.reset_wait();
            } else {
                break;
            }
        }
    }

    m.params = best_params;
    m.momentum = best_momentum;
    return hist;
}

void save_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "epoch,train_loss,val_acc,phase\n";
    for (const EpochRecord& r : h.epochs)
        out << r.epoch << "," << format_double(r.train_loss) << "," << format_double(r.val_acc)
            << "," << r.phase << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace tplab
