#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "tplab/errors.hpp"
#include "tplab/scenario.hpp"
#include "tplab/streamgen.hpp"

using namespace tplab;

namespace {

GenConfig tiny_gen() {
    GenConfig g;
    g.n_classes = 4;
    g.feature_dim = 3;
    g.rate_hz = 6.0;
    g.drive_length_s = 12.0;
    g.n_unlabeled_drives = 2;
    g.waypoint_count = 4;
    g.dwell_min_s = 0.8;
    g.seed = 5;
    return g;
}

ScenarioCfg fast_scenario(ScenarioKind kind) {
    ScenarioCfg cfg;
    cfg.kind = kind;
    cfg.retrain = RetrainMode::scratch;
    cfg.query_fraction = 0.10;
    cfg.total_budget_fraction = 0.5;
    cfg.arch.input_dim = 3;
    cfg.arch.hidden_dims = {8};
    cfg.arch.n_classes = 4;
    cfg.arch.dropout_p = 0.25;
    cfg.arch.lossmod_mid_dim = 4;
    cfg.train.batch_size = 8;
    cfg.train.lr = 0.02;
    cfg.train.momentum = 0.9;
    cfg.train.patience = 3;
    cfg.train.max_epochs = 15;
    cfg.query.mc_passes = 4;
    return cfg;
}

const DatasetBundle& bundle() {
    static const DatasetBundle b = gen_bundle(tiny_gen());
    return b;
}

std::size_t frames_of(const std::vector<Drive>& drives) {
    std::size_t n = 0;
    for (const Drive& d : drives) n += d.frames.size();
    return n;
}

std::size_t budget_of(const Drive& d, double q) {
    return static_cast<std::size_t>(std::floor(q * static_cast<double>(d.frames.size())));
}

void check_common(const RunResult& r, const DatasetBundle& b, const ScenarioCfg& cfg) {
    const std::size_t initial = frames_of(b.initial_labeled);
    const std::size_t total =
        initial + frames_of(b.unlabeled);
    const std::size_t cap = static_cast<std::size_t>(
        std::floor(cfg.total_budget_fraction * static_cast<double>(initial)));

    std::size_t sum_selected = 0;
    for (const CycleRecord& rec : r.records) {
        CHECK(rec.test_accuracy >= 0.0);
        CHECK(rec.test_accuracy <= 1.0);
        CHECK(rec.train_epochs >= 1);
        CHECK(rec.labeled_fraction ==
              static_cast<double>(rec.labeled_count) / static_cast<double>(total));
        sum_selected += rec.n_selected;
    }
    CHECK(sum_selected <= cap);
    CHECK(r.selected.size() == sum_selected);
    std::set<FrameRef> distinct(r.selected.begin(), r.selected.end());
    CHECK(distinct.size() == r.selected.size());

    std::set<std::string> stream_ids;
    for (const Drive& d : b.unlabeled) stream_ids.insert(d.id);
    for (const FrameRef& ref : r.selected) CHECK(stream_ids.count(ref.drive_id) == 1);

    // diversity rows exist exactly for the selecting cycles
    std::size_t di = 0;
    for (const CycleRecord& rec : r.records) {
        if (rec.n_selected == 0 || rec.drive_id == "-") continue;
        REQUIRE(di < r.diversity.size());
        CHECK(r.diversity[di].cycle == rec.cycle);
        CHECK(r.diversity[di].drive_id == rec.drive_id);
        CHECK(r.diversity[di].n_selected == rec.n_selected);
        CHECK(r.diversity[di].mean_pairwise >= 0.0);
        CHECK(r.diversity[di].covering_radius >= 0.0);
        ++di;
    }
    CHECK(di == r.diversity.size());
}

bool same_but_time(const RunResult& a, const RunResult& b) {
    if (a.records.size() != b.records.size()) return false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const CycleRecord &x = a.records[i], &y = b.records[i];
        if (x.cycle != y.cycle || x.drive_id != y.drive_id || x.n_selected != y.n_selected ||
            x.labeled_count != y.labeled_count || x.labeled_fraction != y.labeled_fraction ||
            x.test_accuracy != y.test_accuracy || x.train_epochs != y.train_epochs)
            return false;
    }
    if (a.selected != b.selected) return false;
    if (a.diversity.size() != b.diversity.size()) return false;
    for (std::size_t i = 0; i < a.diversity.size(); ++i) {
        const CycleDiversity &x = a.diversity[i], &y = b.diversity[i];
        if (x.cycle != y.cycle || x.drive_id != y.drive_id || x.n_selected != y.n_selected ||
            x.mean_pairwise != y.mean_pairwise || x.covering_radius != y.covering_radius)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("scenario and retrain names round trip") {
    CHECK(scenario_from_string("stream_batch") == ScenarioKind::stream_batch);
    CHECK(scenario_from_string("pool_stream") == ScenarioKind::pool_stream);
    CHECK(scenario_name(ScenarioKind::stream_batch) == "stream_batch");
    CHECK(scenario_name(ScenarioKind::pool_stream) == "pool_stream");
    CHECK_THROWS_AS(scenario_from_string("offline"), ConfigError);
    CHECK(retrain_from_string("scratch") == RetrainMode::scratch);
    CHECK(retrain_from_string("continuous") == RetrainMode::continuous);
    CHECK_THROWS_AS(retrain_from_string("warm"), ConfigError);
}

TEST_CASE("scenario config validation") {
    ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    CHECK_NOTHROW(cfg.validate());
    cfg.query_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = fast_scenario(ScenarioKind::stream_batch);
    cfg.total_budget_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("stream batch walks the drives in order and evaluates first") {
    const DatasetBundle& b = bundle();
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    const RunResult r = run_scenario(StrategyId::random, b, cfg, 1);
    check_common(r, b, cfg);

    REQUIRE(r.records.size() == b.unlabeled.size() + 1);
    const std::size_t initial = frames_of(b.initial_labeled);

    // the accuracy of record k is measured before drive k contributes labels
    CHECK(r.records[0].cycle == 0);
    CHECK(r.records[0].drive_id == b.unlabeled[0].id);
    CHECK(r.records[0].labeled_count == initial);
    CHECK(r.records[1].drive_id == b.unlabeled[1].id);
    CHECK(r.records[1].labeled_count == initial + r.records[0].n_selected);
    CHECK(r.records[2].drive_id == "-");
    CHECK(r.records[2].n_selected == 0);
    CHECK(r.records[2].labeled_count ==
          initial + r.records[0].n_selected + r.records[1].n_selected);

    for (std::size_t k = 0; k < b.unlabeled.size(); ++k)
        CHECK(r.records[k].n_selected <= budget_of(b.unlabeled[k], cfg.query_fraction));

    // the per-drive budget is met while the cap allows it
    CHECK(r.records[0].n_selected == budget_of(b.unlabeled[0], cfg.query_fraction));
}

TEST_CASE("stream batch rejects pool-only strategies") {
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    CHECK_THROWS_AS(run_scenario(StrategyId::coreset, bundle(), cfg, 1), ConfigError);
    CHECK_THROWS_AS(run_scenario(StrategyId::badge, bundle(), cfg, 1), ConfigError);
    CHECK_THROWS_AS(run_scenario(StrategyId::batchbald, bundle(), cfg, 1), ConfigError);
}

TEST_CASE("stream batch is deterministic and seed sensitive") {
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    const RunResult a = run_scenario(StrategyId::tpl, bundle(), cfg, 42);
    const RunResult b = run_scenario(StrategyId::tpl, bundle(), cfg, 42);
    CHECK(same_but_time(a, b));
    const RunResult c = run_scenario(StrategyId::tpl, bundle(), cfg, 43);
    CHECK(!same_but_time(a, c));
}

TEST_CASE("the labeled fraction grid does not depend on the strategy") {
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    const RunResult r1 = run_scenario(StrategyId::random, bundle(), cfg, 42);
    const RunResult r2 = run_scenario(StrategyId::tpl, bundle(), cfg, 42);
    const RunResult r3 = run_scenario(StrategyId::entropy, bundle(), cfg, 42);
    REQUIRE(r1.records.size() == r2.records.size());
    REQUIRE(r1.records.size() == r3.records.size());
    for (std::size_t i = 0; i < r1.records.size(); ++i) {
        CHECK(r1.records[i].labeled_fraction == r2.records[i].labeled_fraction);
        CHECK(r1.records[i].labeled_fraction == r3.records[i].labeled_fraction);
        CHECK(r1.records[i].n_selected == r2.records[i].n_selected);
    }
}

TEST_CASE("an exhausted budget stops selection") {
    const DatasetBundle& b = bundle();
    ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    cfg.total_budget_fraction = 0.05;
    const std::size_t cap = static_cast<std::size_t>(
        std::floor(0.05 * static_cast<double>(frames_of(b.initial_labeled))));
    const RunResult r = run_scenario(StrategyId::random, b, cfg, 1);
    check_common(r, b, cfg);
    CHECK(r.records[0].n_selected == cap);  // cap is below the per-drive budget
    CHECK(r.records[1].n_selected == 0);
    CHECK(r.selected.size() == cap);
    CHECK(r.diversity.size() == 1);
}

TEST_CASE("pool stream records a baseline then selects from a growing pool") {
    const DatasetBundle& b = bundle();
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::pool_stream);
    const RunResult r = run_scenario(StrategyId::random, b, cfg, 1);
    check_common(r, b, cfg);

    REQUIRE(r.records.size() == b.unlabeled.size() + 1);
    const std::size_t initial = frames_of(b.initial_labeled);

    CHECK(r.records[0].cycle == 0);
    CHECK(r.records[0].drive_id == "-");
    CHECK(r.records[0].n_selected == 0);
    CHECK(r.records[0].labeled_count == initial);
    CHECK(r.records[0].selection_seconds == 0.0);

    // later records report the training set after folding in their batch
    CHECK(r.records[1].drive_id == b.unlabeled[0].id);
    CHECK(r.records[1].labeled_count == initial + r.records[1].n_selected);
    CHECK(r.records[2].drive_id == b.unlabeled[1].id);
    CHECK(r.records[2].labeled_count ==
          initial + r.records[1].n_selected + r.records[2].n_selected);
    for (std::size_t k = 1; k < r.records.size(); ++k)
        CHECK(r.records[k].n_selected <= budget_of(b.unlabeled[k - 1], cfg.query_fraction));
}

TEST_CASE("pool stream accepts pool-only strategies") {
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::pool_stream);
    const RunResult r = run_scenario(StrategyId::coreset, bundle(), cfg, 1);
    check_common(r, bundle(), cfg);
    CHECK(r.records.size() == bundle().unlabeled.size() + 1);
    CHECK(r.selected.size() > 0);
}

TEST_CASE("pool stream is deterministic") {
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::pool_stream);
    const RunResult a = run_scenario(StrategyId::entropy, bundle(), cfg, 64);
    const RunResult b = run_scenario(StrategyId::entropy, bundle(), cfg, 64);
    CHECK(same_but_time(a, b));
}

TEST_CASE("continuous retraining keeps the budget grid") {
    ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    cfg.retrain = RetrainMode::continuous;
    const RunResult r = run_scenario(StrategyId::random, bundle(), cfg, 1);
    check_common(r, bundle(), cfg);
    const ScenarioCfg scratch = fast_scenario(ScenarioKind::stream_batch);
    const RunResult s = run_scenario(StrategyId::random, bundle(), scratch, 1);
    REQUIRE(r.records.size() == s.records.size());
    for (std::size_t i = 0; i < r.records.size(); ++i)
        CHECK(r.records[i].labeled_count == s.records[i].labeled_count);
}

TEST_CASE("mismatched architectures are rejected up front") {
    ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    cfg.arch.input_dim = 5;
    CHECK_THROWS_AS(run_scenario(StrategyId::random, bundle(), cfg, 1), ConfigError);
    cfg = fast_scenario(ScenarioKind::stream_batch);
    cfg.arch.n_classes = 3;
    CHECK_THROWS_AS(run_scenario(StrategyId::random, bundle(), cfg, 1), ConfigError);
}

TEST_CASE("empty bundle splits are rejected") {
    DatasetBundle broken = bundle();
    broken.unlabeled.clear();
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    CHECK_THROWS_AS(run_scenario(StrategyId::random, broken, cfg, 1), ConfigError);
    DatasetBundle noval = bundle();
    noval.val.clear();
    CHECK_THROWS_AS(run_scenario(StrategyId::random, noval, cfg, 1), ConfigError);
}

TEST_CASE("the full-data reference is deterministic and bounded") {
    const ScenarioCfg cfg = fast_scenario(ScenarioKind::stream_batch);
    const ReferenceResult a = run_full_reference(bundle(), cfg, 7);
    const ReferenceResult b = run_full_reference(bundle(), cfg, 7);
    CHECK(a.test_accuracy == b.test_accuracy);
    CHECK(a.train_epochs == b.train_epochs);
    CHECK(a.test_accuracy >= 0.0);
    CHECK(a.test_accuracy <= 1.0);
    CHECK(a.train_epochs >= 1);
}
