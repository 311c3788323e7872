#include "tplab/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "tplab/errors.hpp"
#include "tplab/metrics.hpp"

namespace tplab {

ScenarioKind scenario_from_string(const std::string& name) {
    if (name == "stream_batch") return ScenarioKind::stream_batch;
    if (name == "pool_stream") return ScenarioKind::pool_stream;
    throw ConfigError("unknown scenario '" + name + "' (valid: stream_batch, pool_stream)");
}

std::string scenario_name(ScenarioKind kind) {
    return kind == ScenarioKind::stream_batch ? "stream_batch" : "pool_stream";
}

RetrainMode retrain_from_string(const std::string& name) {
    if (name == "scratch") return RetrainMode::scratch;
    if (name == "continuous") return RetrainMode::continuous;
    throw ConfigError("unknown retrain mode '" + name + "' (valid: scratch, continuous)");
}

std::string retrain_name(RetrainMode mode) {
    return mode == RetrainMode::scratch ? "scratch" : "continuous";
}

void ScenarioCfg::validate() const {
    if (!(query_fraction > 0.0) || query_fraction > 1.0)
        throw ConfigError("scenario.query_fraction must be in (0, 1]");
    if (!(total_budget_fraction > 0.0) || total_budget_fraction > 1.0)
        throw ConfigError("scenario.total_budget_fraction must be in (0, 1]");
    arch.validate();
    train.validate();
    query.validate();
}

namespace {

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct Setup {
    FrameSet labeled, val, test;
    std::size_t total_frames = 0;  // initial + unlabeled, the fraction denominator
    std::size_t total_budget = 0;
};

Setup prepare(const DatasetBundle& bundle, const ScenarioCfg& cfg) {
    cfg.validate();
    if (bundle.initial_labeled.empty()) throw ConfigError("bundle has no initial labeled drives");
    if (bundle.unlabeled.empty()) throw ConfigError("bundle has no unlabeled drives");
    if (bundle.val.empty()) throw ConfigError("bundle has no validation drives");
    if (bundle.test.empty()) throw ConfigError("bundle has no test drives");
    if (cfg.arch.input_dim != bundle.meta.feature_dim)
        throw ConfigError("arch.input_dim " + std::to_string(cfg.arch.input_dim) +
                          " does not match bundle feature_dim " +
                          std::to_string(bundle.meta.feature_dim));
    if (cfg.arch.n_classes != bundle.meta.n_classes)
        throw ConfigError("arch.n_classes " + std::to_string(cfg.arch.n_classes) +
                          " does not match bundle n_classes " +
                          std::to_string(bundle.meta.n_classes));
    Setup s;
    const std::size_t dim = static_cast<std::size_t>(bundle.meta.feature_dim);
    s.labeled.dim = s.val.dim = s.test.dim = dim;
    for (const Drive& d : bundle.initial_labeled) s.labeled.add_drive(d);
    for (const Drive& d : bundle.val) s.val.add_drive(d);
    for (const Drive& d : bundle.test) s.test.add_drive(d);
    s.total_frames = s.labeled.size();
    for (const Drive& d : bundle.unlabeled) s.total_frames += d.frames.size();
    s.total_budget = static_cast<std::size_t>(
        std::floor(cfg.total_budget_fraction * static_cast<double>(s.labeled.size())));
    return s;
}

// Fresh model for scratch retraining; for continuous training the parameters
// carry over and only the momentum resets.
void reset_model(Model& m, const ScenarioCfg& cfg, std::uint64_t seed, int cycle, bool first) {
    if (cfg.retrain == RetrainMode::scratch || first) {
        m = init_model(cfg.arch, Rng(seed).split("init", static_cast<std::uint64_t>(cycle)).next_u64());
    } else {
        m.momentum = zero_params(m.arch);
    }
}

TrainHistory fit(Model& m, const FrameSet& labeled, const FrameSet& val, const ScenarioCfg& cfg,
                 std::uint64_t seed, int cycle) {
    TrainCfg tc = cfg.train;
    tc.seed = Rng(seed).split("train", static_cast<std::uint64_t>(cycle)).next_u64();
    return train_model(m, labeled, val, tc);
}

std::vector<std::vector<double>> latents_of_refs(const Model& m, const Drive& drive,
                                                 const std::vector<std::size_t>& idx) {
    std::vector<std::vector<double>> out;
    out.reserve(idx.size());
    for (const std::size_t i : idx) out.push_back(latent_of(m, drive.frames[i].x));
    return out;
}

void check_no_frame_twice(const std::vector<FrameRef>& selected) {
    std::set<FrameRef> seen;
    for (const FrameRef& r : selected)
        if (!seen.insert(r).second)
            throw NumericError("frame selected twice: " + r.drive_id + "#" +
                               std::to_string(r.index));
}

std::size_t cycle_budget(const Drive& drive, const ScenarioCfg& cfg, std::size_t remaining) {
    const std::size_t want = static_cast<std::size_t>(
        std::floor(cfg.query_fraction * static_cast<double>(drive.frames.size())));
    return std::min(want, remaining);
}

RunResult run_stream_batch(StrategyId id, const DatasetBundle& bundle, const ScenarioCfg& cfg,
                           std::uint64_t seed) {
    if (!is_stream_capable(id))
        throw ConfigError("strategy '" + strategy_name(id) +
                          "' needs pool access and cannot run in the stream_batch scenario");
    Setup s = prepare(bundle, cfg);
    RunResult out;
    Model m;
    std::size_t remaining = s.total_budget;
    const int n_drives = static_cast<int>(bundle.unlabeled.size());
    for (int cycle = 0; cycle <= n_drives; ++cycle) {
        reset_model(m, cfg, seed, cycle, cycle == 0);
        const TrainHistory hist = fit(m, s.labeled, s.val, cfg, seed, cycle);
        CycleRecord rec;
        rec.cycle = cycle;
        rec.labeled_count = s.labeled.size();
        rec.labeled_fraction =
            static_cast<double>(rec.labeled_count) / static_cast<double>(s.total_frames);
        rec.test_accuracy = evaluate_accuracy(m, s.test);
        rec.train_epochs = static_cast<int>(hist.epochs.size());
        if (cycle == n_drives) {
            rec.drive_id = "-";
            out.records.push_back(std::move(rec));
            break;
        }
        const Drive& drive = bundle.unlabeled[static_cast<std::size_t>(cycle)];
        rec.drive_id = drive.id;
        const std::size_t b = cycle_budget(drive, cfg, remaining);
        std::vector<std::size_t> picked;
        if (b > 0) {
            Rng select_rng = Rng(seed).split("select", static_cast<std::uint64_t>(cycle));
            AccessCounter counter;
            const Clock clock;
            if (id == StrategyId::aled) {
                const double h = aled_bandwidth(m, s.labeled, cfg.query, select_rng.split("bandwidth"));
                picked = aled_select_stream(m, drive, b, h, cfg.query, &counter);
            } else {
                auto scorer = make_stream_scorer(id, m, cfg.query, select_rng.split("scorer"));
                picked = stream_select_top_b(*scorer, drive, b, &counter);
            }
            rec.selection_seconds = clock.seconds();
            if (counter.frames_fed != drive.frames.size())
                throw NumericError("selection touched " + std::to_string(counter.frames_fed) +
                                   " of " + std::to_string(drive.frames.size()) + " frames");
        }
        rec.n_selected = picked.size();
        remaining -= picked.size();
        if (!picked.empty()) {
            const auto batch = latents_of_refs(m, drive, picked);
            std::vector<std::size_t> all(drive.frames.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            const BatchDiversity div = batch_diversity(batch, latents_of_refs(m, drive, all));
            out.diversity.push_back(
                {cycle, drive.id, picked.size(), div.mean_pairwise, div.covering_radius});
        }
        for (const std::size_t i : picked) {
            s.labeled.add(drive.frames[i]);
            out.selected.push_back({drive.id, i});
        }
        out.records.push_back(std::move(rec));
    }
    check_no_frame_twice(out.selected);
    return out;
}

RunResult run_pool_stream(StrategyId id, const DatasetBundle& bundle, const ScenarioCfg& cfg,
                          std::uint64_t seed) {
    Setup s = prepare(bundle, cfg);
    RunResult out;
    Model m;
    std::size_t remaining = s.total_budget;
    const int n_drives = static_cast<int>(bundle.unlabeled.size());
    std::vector<std::vector<char>> taken;

    reset_model(m, cfg, seed, 0, true);
    TrainHistory hist = fit(m, s.labeled, s.val, cfg, seed, 0);
    out.records.push_back({0, "-", 0, s.labeled.size(),
                           static_cast<double>(s.labeled.size()) / static_cast<double>(s.total_frames),
                           evaluate_accuracy(m, s.test), 0.0, static_cast<int>(hist.epochs.size())});

    for (int cycle = 1; cycle <= n_drives; ++cycle) {
        const std::size_t pool_n = static_cast<std::size_t>(cycle);
        const Drive& drive = bundle.unlabeled[pool_n - 1];
        taken.emplace_back(drive.frames.size(), 0);
        const std::span<const Drive> pool(bundle.unlabeled.data(), pool_n);

        const std::size_t b = cycle_budget(drive, cfg, remaining);
        CycleRecord rec;
        rec.cycle = cycle;
        rec.drive_id = drive.id;
        std::vector<FrameRef> picked;
        if (b > 0) {
            Rng select_rng = Rng(seed).split("select", static_cast<std::uint64_t>(cycle));
            const Clock clock;
            picked = pool_select(id, m, pool, taken, s.labeled, b, cfg.query, select_rng);
            rec.selection_seconds = clock.seconds();
        }
        rec.n_selected = picked.size();
        remaining -= picked.size();

        if (!picked.empty()) {
            std::map<std::string, std::size_t> pos;
            for (std::size_t d = 0; d < pool_n; ++d) pos[pool[d].id] = d;
            std::vector<std::pair<std::size_t, std::size_t>> sorted;
            for (const FrameRef& r : picked) sorted.push_back({pos.at(r.drive_id), r.index});
            std::sort(sorted.begin(), sorted.end());
            std::vector<std::vector<double>> batch, candidates;
            for (const auto& [d, i] : sorted) batch.push_back(latent_of(m, pool[d].frames[i].x));
            for (std::size_t d = 0; d < pool_n; ++d)
                for (std::size_t i = 0; i < pool[d].frames.size(); ++i)
                    if (!taken[d][i]) candidates.push_back(latent_of(m, pool[d].frames[i].x));
            const BatchDiversity div = batch_diversity(batch, candidates);
            out.diversity.push_back(
                {cycle, drive.id, picked.size(), div.mean_pairwise, div.covering_radius});
            for (const auto& [d, i] : sorted) {
                if (taken[d][i])
                    throw NumericError("frame selected twice: " + pool[d].id + "#" +
                                       std::to_string(i));
                taken[d][i] = 1;
                s.labeled.add(pool[d].frames[i]);
                out.selected.push_back({pool[d].id, i});
            }
        }

        reset_model(m, cfg, seed, cycle, false);
        hist = fit(m, s.labeled, s.val, cfg, seed, cycle);
        rec.labeled_count = s.labeled.size();
        rec.labeled_fraction =
            static_cast<double>(rec.labeled_count) / static_cast<double>(s.total_frames);
        rec.test_accuracy = evaluate_accuracy(m, s.test);
        rec.train_epochs = static_cast<int>(hist.epochs.size());
        out.records.push_back(std::move(rec));
    }
    check_no_frame_twice(out.selected);
    return out;
}

}  // namespace

RunResult run_scenario(StrategyId id, const DatasetBundle& bundle, const ScenarioCfg& cfg,
                       std::uint64_t seed) {
    return cfg.kind == ScenarioKind::stream_batch ? run_stream_batch(id, bundle, cfg, seed)
                                                  : run_pool_stream(id, bundle, cfg, seed);
}

ReferenceResult run_full_reference(const DatasetBundle& bundle, const ScenarioCfg& cfg,
                                   std::uint64_t seed) {
    Setup s = prepare(bundle, cfg);
    for (const Drive& d : bundle.unlabeled) s.labeled.add_drive(d);
    Model m = init_model(cfg.arch, Rng(seed).split("ref-init").next_u64());
    TrainCfg tc = cfg.train;
    tc.seed = Rng(seed).split("ref-train").next_u64();
    const TrainHistory hist = train_model(m, s.labeled, s.val, tc);
    return {evaluate_accuracy(m, s.test), static_cast<int>(hist.epochs.size())};
}

}  // namespace tplab
