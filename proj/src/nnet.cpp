#include "tplab/nnet.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tplab/decimal.hpp"
#include "tplab/errors.hpp"
#include "tplab/kernels.hpp"

namespace tplab {

using nlohmann::json;

void ArchSpec::validate() const {
    if (input_dim < 1) throw ConfigError("arch.input_dim must be >= 1");
    if (hidden_dims.empty()) throw ConfigError("arch.hidden_dims must not be empty");
    for (const int h : hidden_dims)
        if (h < 1) throw ConfigError("arch.hidden_dims entries must be >= 1");
    if (n_classes < 2) throw ConfigError("arch.n_classes must be >= 2");
    if (!(dropout_p >= 0.0) || dropout_p >= 1.0)
        throw ConfigError("arch.dropout_p must be in [0, 1)");
    if (lossmod_mid_dim < 1) throw ConfigError("arch.lossmod_mid_dim must be >= 1");
    if (!lossmod_attach.empty()) {
        int prev = -1;
        for (const int a : lossmod_attach) {
            if (a < 0 || a >= static_cast<int>(hidden_dims.size()))
                throw ConfigError("arch.lossmod_attach index out of range");
            if (a <= prev) throw ConfigError("arch.lossmod_attach must be strictly increasing");
            prev = a;
        }
    }
}

std::vector<int> ArchSpec::attachments() const {
    if (!lossmod_attach.empty()) return lossmod_attach;
    std::vector<int> all(hidden_dims.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
}

ParamSet zero_params(const ArchSpec& arch) {
    ParamSet p;
    std::size_t in = static_cast<std::size_t>(arch.input_dim);
    for (const int h : arch.hidden_dims) {
        LinearLayer l;
        l.resize(in, static_cast<std::size_t>(h));
        p.blocks.push_back(std::move(l));
        in = static_cast<std::size_t>(h);
    }
    p.head.resize(in, static_cast<std::size_t>(arch.n_classes));
    const auto att = arch.attachments();
    std::size_t concat = 0;
    for (const int a : att) {
        LinearLayer l;
        l.resize(static_cast<std::size_t>(arch.hidden_dims[static_cast<std::size_t>(a)]),
                 static_cast<std::size_t>(arch.lossmod_mid_dim));
        p.lossmod_mid.push_back(std::move(l));
        concat += static_cast<std::size_t>(arch.lossmod_mid_dim);
    }
    p.lossmod_out.resize(concat, 1);
    return p;
}

namespace {

void layer_ptrs(LinearLayer& l, std::vector<double*>& out) {
    for (double& v : l.w) out.push_back(&v);
    for (double& v : l.b) out.push_back(&v);
}

void init_layer(LinearLayer& l, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (double& v : l.w) v = bound * (2.0 * rng.uniform01() - 1.0);
    for (double& v : l.b) v = bound * (2.0 * rng.uniform01() - 1.0);
}

}  // namespace

std::vector<double*> param_ptrs(ParamSet& p) {
    std::vector<double*> out;
    for (LinearLayer& l : p.blocks) layer_ptrs(l, out);
    layer_ptrs(p.head, out);
    for (LinearLayer& l : p.lossmod_mid) layer_ptrs(l, out);
    layer_ptrs(p.lossmod_out, out);
    return out;
}

std::vector<const double*> param_ptrs(const ParamSet& p) {
    const auto ptrs = param_ptrs(const_cast<ParamSet&>(p));
    return {ptrs.begin(), ptrs.end()};
}

Model init_model(const ArchSpec& arch, std::uint64_t seed) {
    arch.validate();
    Model m;
    m.arch = arch;
    m.params = zero_params(arch);
    m.momentum = zero_params(arch);
    Rng rng = Rng(seed).split("init");
    for (LinearLayer& l : m.params.blocks) init_layer(l, rng);
    init_layer(m.params.head, rng);
    for (LinearLayer& l : m.params.lossmod_mid) init_layer(l, rng);
    init_layer(m.params.lossmod_out, rng);
    return m;
}

DropoutMask sample_dropout(const ArchSpec& arch, Rng& rng) {
    DropoutMask mask;
    const double p = arch.dropout_p;
    const double keep_scale = p > 0.0 ? 1.0 / (1.0 - p) : 1.0;
    for (const int h : arch.hidden_dims) {
        std::vector<double> row(static_cast<std::size_t>(h), 1.0);
        if (p > 0.0)
            for (double& v : row) v = rng.uniform01() < p ? 0.0 : keep_scale;
        mask.block.push_back(std::move(row));
    }
    return mask;
}

namespace {

void check_finite_block(const std::vector<double>& v, const char* what, std::size_t idx) {
    if (!std::isfinite(kern::sum(v.data(), v.size())))
        throw NumericError("non-finite activation in " + std::string(what) + " " +
                           std::to_string(idx));
}

ForwardTrace forward_impl(const Model& m, std::span<const double> x, const DropoutMask* mask) {
    if (x.size() != static_cast<std::size_t>(m.arch.input_dim))
        throw ConfigError("forward: input has " + std::to_string(x.size()) + " values, arch expects " +
                          std::to_string(m.arch.input_dim));
    ++m.forward_count;
    ForwardTrace tr;
    const std::size_t n_blocks = m.params.blocks.size();
    tr.block_pre.resize(n_blocks);
    tr.block_act.resize(n_blocks);
    const double* input = x.data();
    for (std::size_t k = 0; k < n_blocks; ++k) {
        const LinearLayer& l = m.params.blocks[k];
        tr.block_pre[k].resize(l.out);
        tr.block_act[k].resize(l.out);
        kern::matvec(l.w.data(), input, l.b.data(), tr.block_pre[k].data(), l.out, l.in);
        kern::relu(tr.block_pre[k].data(), tr.block_act[k].data(), l.out);
        if (mask) {
            const std::vector<double>& row = mask->block[k];
            for (std::size_t i = 0; i < l.out; ++i) tr.block_act[k][i] *= row[i];
        }
        check_finite_block(tr.block_act[k], "block", k);
        input = tr.block_act[k].data();
    }

    const LinearLayer& head = m.params.head;
    tr.logits.resize(head.out);
    kern::matvec(head.w.data(), input, head.b.data(), tr.logits.data(), head.out, head.in);
    check_finite_block(tr.logits, "head", 0);

    const auto att = m.arch.attachments();
    tr.mod_pre.resize(att.size());
    tr.mod_act.resize(att.size());
    const std::size_t mid = static_cast<std::size_t>(m.arch.lossmod_mid_dim);
    double acc = 0.0;
    for (std::size_t a = 0; a < att.size(); ++a) {
        const LinearLayer& l = m.params.lossmod_mid[a];
        const std::vector<double>& src = tr.block_act[static_cast<std::size_t>(att[a])];
        tr.mod_pre[a].resize(mid);
        tr.mod_act[a].resize(mid);
        kern::matvec(l.w.data(), src.data(), l.b.data(), tr.mod_pre[a].data(), l.out, l.in);
        kern::relu(tr.mod_pre[a].data(), tr.mod_act[a].data(), mid);
        check_finite_block(tr.mod_act[a], "loss module", a);
        acc += kern::dot(m.params.lossmod_out.w.data() + a * mid, tr.mod_act[a].data(), mid);
    }
    tr.predicted_loss_linear = acc;
    tr.predicted_loss = acc + m.params.lossmod_out.b[0];
    if (!std::isfinite(tr.predicted_loss))
        throw NumericError("non-finite activation in loss module output");
    return tr;
}

}  // namespace

ForwardTrace forward_eval(const Model& m, std::span<const double> x) {
    return forward_impl(m, x, nullptr);
}

ForwardTrace forward_train(const Model& m, std::span<const double> x, const DropoutMask& mask) {
    return forward_impl(m, x, &mask);
}

std::vector<std::vector<double>> mc_predict(const Model& m, std::span<const double> x,
                                            int t_passes, Rng& rng) {
    if (t_passes < 1) throw ConfigError("mc_predict: t_passes must be >= 1");
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(t_passes));
    for (int t = 0; t < t_passes; ++t) {
        const DropoutMask mask = sample_dropout(m.arch, rng);
        const ForwardTrace tr = forward_train(m, x, mask);
        std::vector<double> probs(tr.logits.size());
        softmax(tr.logits, probs);
        out.push_back(std::move(probs));
    }
    return out;
}

std::vector<double> latent_of(const Model& m, std::span<const double> x) {
    return forward_eval(m, x).latent();
}

// ==================== batch objective ====================

namespace {

struct BatchTraces {
    std::vector<ForwardTrace> traces;
    std::vector<double> ce;
    std::vector<double> pred;
};

BatchTraces run_batch(const Model& m, const FrameSet& data, std::span<const std::size_t> idx,
                      const std::vector<DropoutMask>& masks) {
    if (masks.size() != idx.size()) throw ConfigError("batch: one dropout mask per sample required");
    BatchTraces bt;
    bt.traces.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::span<const double> x(data.x(idx[i]), data.dim);
        bt.traces.push_back(forward_train(m, x, masks[i]));
        bt.ce.push_back(cross_entropy(bt.traces.back().logits, data.ys[idx[i]]));
        bt.pred.push_back(bt.traces.back().predicted_loss);
    }
    return bt;
}

BatchEval eval_of(const BatchTraces& bt, const LossCfg& cfg) {
    BatchEval ev;
    ev.per_sample_ce = bt.ce;
    ev.per_sample_pred = bt.pred;
    ev.ce_mean = kern::sum(bt.ce.data(), bt.ce.size()) / static_cast<double>(bt.ce.size());
    ev.module_loss = loss_module_loss(bt.ce, bt.pred, cfg);
    ev.value = combined_loss(ev.ce_mean, ev.module_loss, cfg.eta);
    return ev;
}

}  // namespace

BatchEval batch_loss(const Model& m, const FrameSet& data, std::span<const std::size_t> idx,
                     const LossCfg& cfg, const std::vector<DropoutMask>& masks) {
    return eval_of(run_batch(m, data, idx, masks), cfg);
}

ParamSet batch_grad(const Model& m, const FrameSet& data, std::span<const std::size_t> idx,
                    const LossCfg& cfg, const std::vector<DropoutMask>& masks,
                    bool detach_lossmod, BatchEval* eval_out) {
    const BatchTraces bt = run_batch(m, data, idx, masks);
    const BatchEval ev = eval_of(bt, cfg);
    if (eval_out) *eval_out = ev;

    const double inv_b = 1.0 / static_cast<double>(idx.size());
    std::vector<double> dpred = loss_module_grad(bt.ce, bt.pred, cfg);
    kern::scale(cfg.eta, dpred.data(), dpred.size());

    ParamSet g = zero_params(m.arch);
    const auto att = m.arch.attachments();
    const std::size_t n_blocks = m.params.blocks.size();
    const std::size_t mid = static_cast<std::size_t>(m.arch.lossmod_mid_dim);

    std::vector<std::vector<double>> dact(n_blocks);
    std::vector<double> dlogits, dmid;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const ForwardTrace& tr = bt.traces[i];
        const double* x = data.x(idx[i]);
        const int y = data.ys[idx[i]];

        for (std::size_t k = 0; k < n_blocks; ++k)
            dact[k].assign(tr.block_act[k].size(), 0.0);

        // Task head: d(ce_mean)/dlogits = (softmax - onehot) / B.
        dlogits.resize(tr.logits.size());
        softmax(tr.logits, dlogits);
        dlogits[static_cast<std::size_t>(y)] -= 1.0;
        kern::scale(inv_b, dlogits.data(), dlogits.size());
        kern::ger_acc(g.head.w.data(), dlogits.data(), tr.latent().data(),
                      m.params.head.out, m.params.head.in);
        kern::axpy(1.0, dlogits.data(), g.head.b.data(), dlogits.size());
        kern::matvec_t_acc(m.params.head.w.data(), dlogits.data(), dact.back().data(),
                           m.params.head.out, m.params.head.in);

        // Loss module: scalar gradient dpred[i] fans out over the concat.
        const double dp = dpred[i];
        if (dp != 0.0) {
            g.lossmod_out.b[0] += dp;
            dmid.resize(mid);
            for (std::size_t a = 0; a < att.size(); ++a) {
                kern::axpy(dp, tr.mod_act[a].data(), g.lossmod_out.w.data() + a * mid, mid);
                for (std::size_t u = 0; u < mid; ++u)
                    dmid[u] = dp * m.params.lossmod_out.w[a * mid + u];
                kern::relu_grad_mask(tr.mod_pre[a].data(), dmid.data(), mid);
                const LinearLayer& l = m.params.lossmod_mid[a];
                const std::vector<double>& src = tr.block_act[static_cast<std::size_t>(att[a])];
                kern::ger_acc(g.lossmod_mid[a].w.data(), dmid.data(), src.data(), l.out, l.in);
                kern::axpy(1.0, dmid.data(), g.lossmod_mid[a].b.data(), mid);
                if (!detach_lossmod)
                    kern::matvec_t_acc(l.w.data(), dmid.data(),
                                       dact[static_cast<std::size_t>(att[a])].data(), l.out, l.in);
            }
        }

        // Backbone, last block first.
        for (std::size_t k = n_blocks; k-- > 0;) {
            std::vector<double>& d = dact[k];
            if (m.arch.dropout_p > 0.0) {
                const std::vector<double>& row = masks[i].block[k];
                for (std::size_t u = 0; u < d.size(); ++u) d[u] *= row[u];
            }
            kern::relu_grad_mask(tr.block_pre[k].data(), d.data(), d.size());
            const LinearLayer& l = m.params.blocks[k];
            const double* input = k == 0 ? x : tr.block_act[k - 1].data();
            kern::ger_acc(g.blocks[k].w.data(), d.data(), input, l.out, l.in);
            kern::axpy(1.0, d.data(), g.blocks[k].b.data(), d.size());
            if (k > 0)
                kern::matvec_t_acc(l.w.data(), d.data(), dact[k - 1].data(), l.out, l.in);
        }
    }
    return g;
}

void sgd_step(Model& m, const ParamSet& grads, double lr, double momentum) {
    const auto w = param_ptrs(m.params);
    const auto v = param_ptrs(m.momentum);
    const auto g = param_ptrs(const_cast<ParamSet&>(grads));
    if (w.size() != g.size()) throw ConfigError("sgd_step: gradient shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
        *v[i] = momentum * *v[i] + *g[i];
        *w[i] -= lr * *v[i];
    }
}

// ==================== checkpoints ====================

namespace {

constexpr int kCheckpointVersion = 1;

json arch_to_json(const ArchSpec& a) {
    return json{{"input_dim", a.input_dim},       {"hidden_dims", a.hidden_dims},
                {"n_classes", a.n_classes},       {"dropout_p", a.dropout_p},
                {"lossmod_attach", a.lossmod_attach}, {"lossmod_mid_dim", a.lossmod_mid_dim}};
}

ArchSpec arch_from_json(const json& j, const std::string& where) {
    static const std::set<std::string> known = {"input_dim",      "hidden_dims",
                                                "n_classes",      "dropout_p",
                                                "lossmod_attach", "lossmod_mid_dim"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ParseError(where + ": unknown field '" + key + "'");
    ArchSpec a;
    try {
        if (j.contains("input_dim")) a.input_dim = j["input_dim"].get<int>();
        if (j.contains("hidden_dims")) a.hidden_dims = j["hidden_dims"].get<std::vector<int>>();
        if (j.contains("n_classes")) a.n_classes = j["n_classes"].get<int>();
        if (j.contains("dropout_p")) a.dropout_p = j["dropout_p"].get<double>();
        if (j.contains("lossmod_attach"))
            a.lossmod_attach = j["lossmod_attach"].get<std::vector<int>>();
        if (j.contains("lossmod_mid_dim")) a.lossmod_mid_dim = j["lossmod_mid_dim"].get<int>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
    return a;
}

json flat_params(const ParamSet& p) {
    json arr = json::array();
    for (const double* ptr : param_ptrs(p)) arr.push_back(format_double(*ptr));
    return arr;
}

void load_flat(ParamSet& p, const json& arr, const std::string& where) {
    const auto ptrs = param_ptrs(p);
    if (!arr.is_array() || arr.size() != ptrs.size())
        throw ParseError(where + ": expected " + std::to_string(ptrs.size()) + " parameters");
    for (std::size_t i = 0; i < ptrs.size(); ++i)
        *ptrs[i] = parse_double(arr[i].get<std::string>(), where);
}

}  // namespace

void save_model(const Model& m, const std::filesystem::path& path) {
    json j;
    j["version"] = kCheckpointVersion;
    j["arch"] = arch_to_json(m.arch);
    j["params"] = flat_params(m.params);
    j["momentum"] = flat_params(m.momentum);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump() << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw ParseError(path.string() + ": missing integer field 'version'");
    if (j["version"].get<int>() != kCheckpointVersion)
        throw ParseError(path.string() + ": unsupported checkpoint version " +
                         std::to_string(j["version"].get<int>()) + ", expected " +
                         std::to_string(kCheckpointVersion));
    Model m;
    m.arch = arch_from_json(j.at("arch"), path.string() + " arch");
    m.arch.validate();
    m.params = zero_params(m.arch);
    m.momentum = zero_params(m.arch);
    load_flat(m.params, j.at("params"), path.string() + " params");
    load_flat(m.momentum, j.at("momentum"), path.string() + " momentum");
    return m;
}

}  // namespace tplab
