#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tplab/objective.hpp"
#include "tplab/rng.hpp"
#include "tplab/types.hpp"

namespace tplab {

// Feed-forward classifier with inverted dropout after every hidden block and
// a loss-predicting module tapped off block activations: per attachment a
// fully connected map to lossmod_mid_dim with ReLU, all attachment outputs
// concatenated into one linear unit that emits the predicted loss.
struct ArchSpec {
    int input_dim = 8;
    std::vector<int> hidden_dims = {64, 64, 32};
    int n_classes = 4;
    double dropout_p = 0.25;
    std::vector<int> lossmod_attach;  // empty = every hidden block
    int lossmod_mid_dim = 32;

    void validate() const;
    std::vector<int> attachments() const;
};

struct LinearLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> w;  // row-major out x in
    std::vector<double> b;

    void resize(std::size_t in_dim, std::size_t out_dim) {
        in = in_dim;
        out = out_dim;
        w.assign(in * out, 0.0);
        b.assign(out, 0.0);
    }
};

// Parameter bundle shared by the model, its gradients and momentum buffers.
struct ParamSet {
    std::vector<LinearLayer> blocks;
    LinearLayer head;
    std::vector<LinearLayer> lossmod_mid;
    LinearLayer lossmod_out;
};

struct Model {
    ArchSpec arch;
    ParamSet params;
    ParamSet momentum;
    mutable std::uint64_t forward_count = 0;  // instrumentation, not thread-safe
};

// Per-unit inverted-dropout factors, one vector per hidden block: 0 for a
// dropped unit, 1/(1-p) for a kept one.
struct DropoutMask {
    std::vector<std::vector<double>> block;
};

struct ForwardTrace {
    std::vector<std::vector<double>> block_pre;  // pre-activation
    std::vector<std::vector<double>> block_act;  // after ReLU and dropout
    std::vector<double> logits;
    std::vector<std::vector<double>> mod_pre;    // per attachment
    std::vector<std::vector<double>> mod_act;
    double predicted_loss = 0.0;
    // predicted_loss without the final bias. The bias is constant along any
    // stream, so consumers that difference consecutive predictions use this
    // value and the constant cancels exactly instead of up to rounding.
    double predicted_loss_linear = 0.0;

    const std::vector<double>& latent() const { return block_act.back(); }
};

Model init_model(const ArchSpec& arch, std::uint64_t seed);

DropoutMask sample_dropout(const ArchSpec& arch, Rng& rng);

ForwardTrace forward_eval(const Model& m, std::span<const double> x);
ForwardTrace forward_train(const Model& m, std::span<const double> x, const DropoutMask& mask);

// T stochastic softmax vectors from independent dropout masks.
std::vector<std::vector<double>> mc_predict(const Model& m, std::span<const double> x,
                                            int t_passes, Rng& rng);

// Penultimate representation: last hidden block activation in eval mode.
std::vector<double> latent_of(const Model& m, std::span<const double> x);

// ==================== batch objective ====================

struct BatchEval {
    double value = 0.0;      // ce_mean + eta * module_loss
    double ce_mean = 0.0;
    double module_loss = 0.0;
    std::vector<double> per_sample_ce;
    std::vector<double> per_sample_pred;
};

// Loss of one training batch under fixed dropout masks. Batch must be even
// and >= 2 (the ranking pairing needs it).
BatchEval batch_loss(const Model& m, const FrameSet& data, std::span<const std::size_t> idx,
                     const LossCfg& cfg, const std::vector<DropoutMask>& masks);

// Analytic gradient of batch_loss w.r.t. every parameter. Per-sample task
// losses enter the module objective as constants. With detach_lossmod the
// module loss still reaches the module parameters but not the backbone.
ParamSet batch_grad(const Model& m, const FrameSet& data, std::span<const std::size_t> idx,
                    const LossCfg& cfg, const std::vector<DropoutMask>& masks,
                    bool detach_lossmod, BatchEval* eval_out = nullptr);

// v <- momentum * v + g;  w <- w - lr * v
void sgd_step(Model& m, const ParamSet& grads, double lr, double momentum);

// ==================== parameter plumbing ====================

ParamSet zero_params(const ArchSpec& arch);

// Flat parameter order used by checkpoints, the FD harness and sgd_step:
// blocks (w then b, in order), head, lossmod_mid (in attachment order),
// lossmod_out.
std::vector<double*> param_ptrs(ParamSet& p);
std::vector<const double*> param_ptrs(const ParamSet& p);

// ==================== checkpoints ====================

// JSON checkpoint with decimal-string parameters; reload is bit-exact.
void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace tplab
