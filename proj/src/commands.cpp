#include "tplab/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tplab/decimal.hpp"
#include "tplab/errors.hpp"
#include "tplab/query.hpp"
#include "tplab/report.hpp"
#include "tplab/streamgen.hpp"

namespace fs = std::filesystem;

namespace tplab {
namespace {

using nlohmann::json;

// ==================== strict config JSON ====================
// User-facing config mistakes raise ConfigError (exit 2); broken data files
// elsewhere raise ParseError (exit 1).

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
}

void check_fields(const json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw ConfigError(where + ": unknown field '" + key + "'");
    }
}

int get_int(const json& j, const char* key, int fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    if (!v.is_number_integer())
        throw ConfigError(where + "." + key + ": expected an integer");
    const std::int64_t x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(where + "." + key + ": out of range");
    return static_cast<int>(x);
}

double get_double(const json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

bool get_bool(const json& j, const char* key, bool fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
    return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + "." + key + ": required string is missing");
    const json& v = j[key];
    if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

std::uint64_t u64_of(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const std::int64_t x = v.get<std::int64_t>();
        if (x < 0) throw ConfigError(where + ": expected a non-negative integer");
        return static_cast<std::uint64_t>(x);
    }
    throw ConfigError(where + ": expected a non-negative integer");
}

std::vector<int> get_int_array(const json& j, const char* key, std::vector<int> fallback,
                               const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of integers");
    std::vector<int> out;
    for (const json& e : v) {
        if (!e.is_number_integer())
            throw ConfigError(where + "." + key + ": expected an array of integers");
        out.push_back(static_cast<int>(e.get<std::int64_t>()));
    }
    return out;
}

LossCfg loss_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    check_fields(j, where, {"xi", "zeta", "lambda", "eta", "l1_mode", "ranking_sign_mode"});
    LossCfg cfg;
    cfg.xi = get_double(j, "xi", cfg.xi, where);
    cfg.zeta = get_double(j, "zeta", cfg.zeta, where);
    cfg.lambda = get_double(j, "lambda", cfg.lambda, where);
    cfg.eta = get_double(j, "eta", cfg.eta, where);
    if (j.contains("l1_mode")) {
        const std::string m = get_string(j, "l1_mode", where);
        if (m == "hard_threshold")
            cfg.l1_mode = LossCfg::L1Mode::hard_threshold;
        else if (m == "hinge")
            cfg.l1_mode = LossCfg::L1Mode::hinge;
        else
            throw ConfigError(where + ".l1_mode: expected 'hard_threshold' or 'hinge'");
    }
    if (j.contains("ranking_sign_mode")) {
        const std::string m = get_string(j, "ranking_sign_mode", where);
        if (m == "yoo_convention")
            cfg.ranking_sign_mode = LossCfg::RankSign::yoo_convention;
        else if (m == "as_printed")
            cfg.ranking_sign_mode = LossCfg::RankSign::as_printed;
        else
            throw ConfigError(where + ".ranking_sign_mode: expected 'yoo_convention' or 'as_printed'");
    }
    return cfg;
}

ArchSpec arch_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    check_fields(j, where, {"input_dim", "hidden_dims", "n_classes", "dropout_p", "lossmod_attach",
                            "lossmod_mid_dim"});
    ArchSpec a;
    a.input_dim = get_int(j, "input_dim", a.input_dim, where);
    a.hidden_dims = get_int_array(j, "hidden_dims", a.hidden_dims, where);
    a.n_classes = get_int(j, "n_classes", a.n_classes, where);
    a.dropout_p = get_double(j, "dropout_p", a.dropout_p, where);
    a.lossmod_attach = get_int_array(j, "lossmod_attach", a.lossmod_attach, where);
    a.lossmod_mid_dim = get_int(j, "lossmod_mid_dim", a.lossmod_mid_dim, where);
    return a;
}

DetachSchedule detach_from_json(const json& v, const std::string& where) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "two_phase_early_stop") return DetachSchedule::two_phase();
        if (s == "never") return DetachSchedule::never();
        throw ConfigError(where + ": expected 'two_phase_early_stop', 'never', or "
                                  "{\"mode\": \"fixed_epoch\", \"epoch\": N}");
    }
    if (v.is_object()) {
        check_fields(v, where, {"mode", "epoch"});
        const std::string mode = get_string(v, "mode", where);
        if (mode != "fixed_epoch")
            throw ConfigError(where + ".mode: only 'fixed_epoch' takes an object form");
        if (!v.contains("epoch")) throw ConfigError(where + ".epoch: required integer is missing");
        return DetachSchedule::fixed(get_int(v, "epoch", 0, where));
    }
    throw ConfigError(where + ": expected a string or an object");
}

TrainCfg train_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    check_fields(j, where, {"batch_size", "lr", "momentum", "patience", "max_epochs", "detach"});
    TrainCfg cfg;
    cfg.batch_size = get_int(j, "batch_size", cfg.batch_size, where);
    cfg.lr = get_double(j, "lr", cfg.lr, where);
    cfg.momentum = get_double(j, "momentum", cfg.momentum, where);
    cfg.patience = get_int(j, "patience", cfg.patience, where);
    cfg.max_epochs = get_int(j, "max_epochs", cfg.max_epochs, where);
    if (j.contains("detach")) cfg.detach = detach_from_json(j["detach"], where + ".detach");
    return cfg;
}

QueryCfg query_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    check_fields(j, where, {"mc_passes", "sieve_epsilon", "bandwidth_mode", "bandwidth",
                            "tpl_mode", "batchbald_samples", "batchbald_exact_limit"});
    QueryCfg cfg;
    cfg.mc_passes = get_int(j, "mc_passes", cfg.mc_passes, where);
    cfg.sieve_epsilon = get_double(j, "sieve_epsilon", cfg.sieve_epsilon, where);
    if (j.contains("bandwidth_mode")) {
        const std::string m = get_string(j, "bandwidth_mode", where);
        if (m == "median_heuristic")
            cfg.bandwidth_mode = QueryCfg::Bandwidth::median_heuristic;
        else if (m == "fixed")
            cfg.bandwidth_mode = QueryCfg::Bandwidth::fixed;
        else
            throw ConfigError(where + ".bandwidth_mode: expected 'median_heuristic' or 'fixed'");
    }
    cfg.bandwidth = get_double(j, "bandwidth", cfg.bandwidth, where);
    if (j.contains("tpl_mode")) {
        const std::string m = get_string(j, "tpl_mode", where);
        if (m == "abs_derivative")
            cfg.tpl_mode = QueryCfg::TplMode::abs_derivative;
        else if (m == "positive_slope")
            cfg.tpl_mode = QueryCfg::TplMode::positive_slope;
        else
            throw ConfigError(where + ".tpl_mode: expected 'abs_derivative' or 'positive_slope'");
    }
    cfg.batchbald_samples = get_int(j, "batchbald_samples", cfg.batchbald_samples, where);
    cfg.batchbald_exact_limit =
        get_int(j, "batchbald_exact_limit", cfg.batchbald_exact_limit, where);
    return cfg;
}

ScenarioCfg scenario_from_json(const json& j, const std::string& where) {
    require_object(j, where);
    check_fields(j, where, {"kind", "retrain", "query_fraction", "total_budget_fraction", "arch",
                            "train", "loss", "query"});
    ScenarioCfg cfg;
    if (j.contains("kind")) cfg.kind = scenario_from_string(get_string(j, "kind", where));
    if (j.contains("retrain")) cfg.retrain = retrain_from_string(get_string(j, "retrain", where));
    cfg.query_fraction = get_double(j, "query_fraction", cfg.query_fraction, where);
    cfg.total_budget_fraction =
        get_double(j, "total_budget_fraction", cfg.total_budget_fraction, where);
    if (j.contains("arch")) cfg.arch = arch_from_json(j["arch"], where + ".arch");
    if (j.contains("train")) cfg.train = train_from_json(j["train"], where + ".train");
    if (j.contains("loss")) cfg.train.loss = loss_from_json(j["loss"], where + ".loss");
    if (j.contains("query")) cfg.query = query_from_json(j["query"], where + ".query");
    return cfg;
}

json detach_to_json(const DetachSchedule& d) {
    switch (d.kind) {
        case DetachSchedule::Kind::two_phase_early_stop: return json("two_phase_early_stop");
        case DetachSchedule::Kind::never: return json("never");
        case DetachSchedule::Kind::fixed_epoch: break;
    }
    return json{{"mode", "fixed_epoch"}, {"epoch", d.epoch}};
}

// ==================== small file helpers ====================

json parse_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string());
}

// ==================== worker pool ====================

struct Job {
    std::string name;
    std::function<void()> fn;
};

int workers_from_env() {
    const char* env = std::getenv("TPLAB_WORKERS");
    if (env == nullptr) return 1;
    const std::string s(env);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos || s.size() > 4)
        throw ConfigError("TPLAB_WORKERS must be a positive integer, got '" + s + "'");
    const int v = std::stoi(s);
    if (v < 1) throw ConfigError("TPLAB_WORKERS must be a positive integer, got '" + s + "'");
    return v;
}

// Runs jobs across `workers` threads. The first failure stops new jobs from
// starting; already finished jobs keep their output files. Rethrows the first
// failure after naming its cell on stderr.
void run_jobs(const std::vector<Job>& jobs, int workers) {
    if (jobs.empty()) return;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex mu;
    std::exception_ptr fail;
    std::string fail_name;
    const auto worker = [&] {
        for (;;) {
            if (stop.load(std::memory_order_relaxed)) return;
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= jobs.size()) return;
            try {
                jobs[i].fn();
            } catch (...) {
                const std::lock_guard<std::mutex> lock(mu);
                if (!fail) {
                    fail = std::current_exception();
                    fail_name = jobs[i].name;
                }
                stop.store(true, std::memory_order_relaxed);
            }
        }
    };
    const std::size_t n =
        std::min(static_cast<std::size_t>(workers), jobs.size());
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n);
        for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (fail) {
        std::cerr << "error in cell " << fail_name << "\n";
        std::rethrow_exception(fail);
    }
}

// ==================== run output assembly ====================

std::string cell_stem(const std::string& strategy, std::uint64_t seed) {
    return strategy + "_" + std::to_string(seed);
}

// Appends a cell file's data lines, insisting on the exact hash line and
// header so stale or foreign files cannot slip into the assembled CSV.
void append_cell(std::string& out, const fs::path& path, const std::string& hash_line,
                 const std::string& header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != hash_line)
        throw ParseError(path.string() + ": missing or mismatched config hash line");
    if (!std::getline(in, line) || line != header)
        throw ParseError(path.string() + ": unexpected header");
    while (std::getline(in, line)) {
        out += line;
        out += '\n';
    }
}

std::size_t frame_total(const std::vector<Drive>& drives) {
    std::size_t n = 0;
    for (const Drive& d : drives) n += d.frames.size();
    return n;
}

}  // namespace

// ==================== run spec ====================

RunSpec run_spec_from_string(const std::string& text, const fs::path& bundle_base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    require_object(j, "run config");
    check_fields(j, "run config", {"bundle", "strategies", "seeds", "reference", "scenario"});

    RunSpec spec;
    fs::path bundle = get_string(j, "bundle", "run config");
    if (bundle.is_relative()) bundle = bundle_base / bundle;
    spec.bundle = bundle.lexically_normal();

    if (!j.contains("strategies") || !j["strategies"].is_array())
        throw ConfigError("run config.strategies: expected an array of strategy names");
    for (const json& e : j["strategies"]) {
        if (!e.is_string())
            throw ConfigError("run config.strategies: expected an array of strategy names");
        spec.strategies.push_back(e.get<std::string>());
    }
    if (spec.strategies.empty()) throw ConfigError("run config.strategies: need at least one");

    if (j.contains("seeds")) {
        if (!j["seeds"].is_array())
            throw ConfigError("run config.seeds: expected an array of non-negative integers");
        spec.seeds.clear();
        for (const json& e : j["seeds"]) spec.seeds.push_back(u64_of(e, "run config.seeds"));
        if (spec.seeds.empty()) throw ConfigError("run config.seeds: need at least one");
    }
    spec.reference = get_bool(j, "reference", spec.reference, "run config");
    if (j.contains("scenario")) spec.scenario = scenario_from_json(j["scenario"], "scenario");
    return spec;
}

RunSpec run_spec_from_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return run_spec_from_string(ss.str(), fs::absolute(path).parent_path());
}

json run_spec_to_json(const RunSpec& spec) {
    // Doubles echo as shortest round-trip decimal strings so dumping the
    // object is deterministic; this echo feeds the config hash.
    json j;
    j["bundle"] = spec.bundle.string();
    j["strategies"] = spec.strategies;
    j["seeds"] = spec.seeds;
    j["reference"] = spec.reference;

    const ScenarioCfg& s = spec.scenario;
    json sc;
    sc["kind"] = scenario_name(s.kind);
    sc["retrain"] = retrain_name(s.retrain);
    sc["query_fraction"] = format_double(s.query_fraction);
    sc["total_budget_fraction"] = format_double(s.total_budget_fraction);

    json arch;
    arch["input_dim"] = s.arch.input_dim;
    arch["hidden_dims"] = s.arch.hidden_dims;
    arch["n_classes"] = s.arch.n_classes;
    arch["dropout_p"] = format_double(s.arch.dropout_p);
    arch["lossmod_attach"] = s.arch.lossmod_attach;
    arch["lossmod_mid_dim"] = s.arch.lossmod_mid_dim;
    sc["arch"] = std::move(arch);

    json train;
    train["batch_size"] = s.train.batch_size;
    train["lr"] = format_double(s.train.lr);
    train["momentum"] = format_double(s.train.momentum);
    train["patience"] = s.train.patience;
    train["max_epochs"] = s.train.max_epochs;
    train["detach"] = detach_to_json(s.train.detach);
    sc["train"] = std::move(train);

    json loss;
    loss["xi"] = format_double(s.train.loss.xi);
    loss["zeta"] = format_double(s.train.loss.zeta);
    loss["lambda"] = format_double(s.train.loss.lambda);
    loss["eta"] = format_double(s.train.loss.eta);
    loss["l1_mode"] =
        s.train.loss.l1_mode == LossCfg::L1Mode::hard_threshold ? "hard_threshold" : "hinge";
    loss["ranking_sign_mode"] =
        s.train.loss.ranking_sign_mode == LossCfg::RankSign::yoo_convention ? "yoo_convention"
                                                                            : "as_printed";
    sc["loss"] = std::move(loss);

    json query;
    query["mc_passes"] = s.query.mc_passes;
    query["sieve_epsilon"] = format_double(s.query.sieve_epsilon);
    query["bandwidth_mode"] = s.query.bandwidth_mode == QueryCfg::Bandwidth::median_heuristic
                                  ? "median_heuristic"
                                  : "fixed";
    query["bandwidth"] = format_double(s.query.bandwidth);
    query["tpl_mode"] = s.query.tpl_mode == QueryCfg::TplMode::abs_derivative ? "abs_derivative"
                                                                              : "positive_slope";
    query["batchbald_samples"] = s.query.batchbald_samples;
    query["batchbald_exact_limit"] = s.query.batchbald_exact_limit;
    sc["query"] = std::move(query);

    j["scenario"] = std::move(sc);
    return j;
}

// ==================== gen ====================

int cmd_gen(const GenOptions& opt) {
    json base = json::object();
    std::string where = "gen config";
    if (opt.config) {
        base = parse_json_file(*opt.config);
        where = opt.config->string();
        require_object(base, where);
    }
    for (const auto& [key, value] : opt.overrides.items()) base[key] = value;
    GenConfig cfg;
    try {
        cfg = gen_from_json(base, where);
    } catch (const ParseError& e) {
        throw ConfigError(e.what());  // user config surface: schema problems are config errors
    }
    validate(cfg);

    const DatasetBundle bundle = gen_bundle(cfg);
    save_bundle(bundle, opt.out);
    const std::string hash = bundle_hash(opt.out);

    std::cout << "bundle " << opt.out.string() << "\n";
    std::cout << "  initial_labeled: " << bundle.initial_labeled.size() << " drives, "
              << frame_total(bundle.initial_labeled) << " frames\n";
    std::cout << "  unlabeled: " << bundle.unlabeled.size() << " drives, "
              << frame_total(bundle.unlabeled) << " frames\n";
    std::cout << "  val: " << bundle.val.size() << " drives, " << frame_total(bundle.val)
              << " frames\n";
    std::cout << "  test: " << bundle.test.size() << " drives, " << frame_total(bundle.test)
              << " frames\n";
    std::cout << "bundle_hash " << hash << "\n";
    return 0;
}

// ==================== run ====================

int cmd_run(const RunOptions& opt) {
    const RunSpec spec = run_spec_from_file(opt.config);
    spec.scenario.validate();

    std::vector<StrategyId> ids;
    std::set<StrategyId> id_seen;
    for (const std::string& name : spec.strategies) {
        const StrategyId id = strategy_from_string(name);
        if (!id_seen.insert(id).second)
            throw ConfigError("run config.strategies: duplicate strategy '" + name + "'");
        if (spec.scenario.kind == ScenarioKind::stream_batch && !is_stream_capable(id))
            throw ConfigError("strategy '" + name +
                              "' needs a pool; the stream_batch scenario is single-pass");
        ids.push_back(id);
    }
    {
        std::set<std::uint64_t> seed_seen;
        for (const std::uint64_t s : spec.seeds)
            if (!seed_seen.insert(s).second)
                throw ConfigError("run config.seeds: duplicate seed " + std::to_string(s));
    }

    const DatasetBundle bundle = load_bundle(spec.bundle);
    const std::string bhash = bundle_hash(spec.bundle);
    if (bundle.meta.feature_dim != spec.scenario.arch.input_dim)
        throw ConfigError("arch.input_dim " + std::to_string(spec.scenario.arch.input_dim) +
                          " does not match the bundle feature_dim " +
                          std::to_string(bundle.meta.feature_dim));
    if (bundle.meta.n_classes != spec.scenario.arch.n_classes)
        throw ConfigError("arch.n_classes " + std::to_string(spec.scenario.arch.n_classes) +
                          " does not match the bundle n_classes " +
                          std::to_string(bundle.meta.n_classes));

    const fs::path cells = opt.out / "cells";
    fs::create_directories(cells);

    const json echo = run_spec_to_json(spec);
    std::string chash;
    {
        json hashed = echo;
        hashed.erase("bundle");
        hashed["bundle_hash"] = bhash;
        Fnv1a64 h;
        h.update(hashed.dump());
        chash = h.hex();
    }
    const std::string hash_line = "# config_hash=" + chash;

    const fs::path mpath = opt.out / "manifest.json";
    if (fs::exists(mpath)) {
        const json old = parse_json_file(mpath);
        if (!old.is_object() || !old.contains("config_hash") || !old["config_hash"].is_string())
            throw ParseError(mpath.string() + ": missing config_hash");
        if (old["config_hash"].get<std::string>() != chash)
            throw ConfigError("output dir " + opt.out.string() +
                              " holds results for a different config (config_hash mismatch)");
    } else {
        json manifest;
        manifest["version"] = 1;
        manifest["config"] = echo;
        manifest["config_hash"] = chash;
        manifest["bundle_hash"] = bhash;
        write_text_atomic(mpath, manifest.dump(2) + "\n");
    }

    std::vector<Job> jobs;
    std::size_t cached = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        for (const std::uint64_t seed : spec.seeds) {
            const std::string stem = cell_stem(spec.strategies[k], seed);
            const fs::path rpath = cells / (stem + ".csv");
            const fs::path dpath = cells / (stem + "_diversity.csv");
            if (fs::exists(rpath) && fs::exists(dpath)) {
                ++cached;
                continue;
            }
            const StrategyId id = ids[k];
            const std::string name = spec.strategies[k];
            jobs.push_back({stem, [&, id, seed, name, rpath, dpath] {
                                const RunResult res =
                                    run_scenario(id, bundle, spec.scenario, seed);
                                std::string rows = hash_line + "\n" + kResultsHeader + "\n";
                                for (const CycleRecord& r : res.records) {
                                    const ResultRow row{name,
                                                        seed,
                                                        r.cycle,
                                                        r.drive_id,
                                                        r.n_selected,
                                                        r.labeled_count,
                                                        r.labeled_fraction,
                                                        r.test_accuracy,
                                                        r.selection_seconds,
                                                        r.train_epochs};
                                    rows += csv_of(row);
                                    rows += '\n';
                                }
                                std::string divs = hash_line + "\n" + std::string(kDiversityHeader) + "\n";
                                for (const CycleDiversity& d : res.diversity) {
                                    const DiversityRow row{name,  seed,
                                                           d.cycle, d.drive_id,
                                                           d.n_selected, d.mean_pairwise,
                                                           d.covering_radius};
                                    divs += csv_of(row);
                                    divs += '\n';
                                }
                                write_text_atomic(dpath, divs);
                                write_text_atomic(rpath, rows);
                            }});
        }
    }
    if (spec.reference) {
        for (const std::uint64_t seed : spec.seeds) {
            const fs::path rpath = cells / ("reference_" + std::to_string(seed) + ".csv");
            if (fs::exists(rpath)) {
                ++cached;
                continue;
            }
            jobs.push_back({"reference_" + std::to_string(seed), [&, seed, rpath] {
                                const ReferenceResult res =
                                    run_full_reference(bundle, spec.scenario, seed);
                                const ReferenceRow row{seed, res.test_accuracy, res.train_epochs};
                                write_text_atomic(rpath, hash_line + "\n" +
                                                             std::string(kReferenceHeader) + "\n" +
                                                             csv_of(row) + "\n");
                            }});
        }
    }

    run_jobs(jobs, workers_from_env());

    // Assemble in sorted (strategy, seed) order so the output never depends
    // on worker scheduling or the strategies array order.
    std::vector<std::pair<std::string, std::uint64_t>> order;
    for (const std::string& name : spec.strategies)
        for (const std::uint64_t seed : spec.seeds) order.emplace_back(name, seed);
    std::sort(order.begin(), order.end());

    std::string results = hash_line + "\n" + std::string(kResultsHeader) + "\n";
    std::string diversity = hash_line + "\n" + std::string(kDiversityHeader) + "\n";
    for (const auto& [name, seed] : order) {
        const std::string stem = cell_stem(name, seed);
        append_cell(results, cells / (stem + ".csv"), hash_line, kResultsHeader);
        append_cell(diversity, cells / (stem + "_diversity.csv"), hash_line, kDiversityHeader);
    }
    write_text_atomic(opt.out / "results.csv", results);
    write_text_atomic(opt.out / "diversity.csv", diversity);
    if (spec.reference) {
        std::vector<std::uint64_t> seeds = spec.seeds;
        std::sort(seeds.begin(), seeds.end());
        std::string refs = hash_line + "\n" + std::string(kReferenceHeader) + "\n";
        for (const std::uint64_t seed : seeds)
            append_cell(refs, cells / ("reference_" + std::to_string(seed) + ".csv"), hash_line,
                        kReferenceHeader);
        write_text_atomic(opt.out / "reference.csv", refs);
    }

    std::cout << "run " << opt.out.string() << ": " << jobs.size() << " cells computed, " << cached
              << " cached\n";
    std::cout << "config_hash " << chash << "\n";
    return 0;
}

// ==================== report ====================

int cmd_report(const ReportOptions& opt) {
    if (opt.inputs.empty()) throw ConfigError("report needs at least one input dir");

    std::vector<ResultRow> rows;
    std::vector<DiversityRow> diversity;
    std::vector<ReferenceRow> references;
    std::map<std::uint64_t, ReferenceRow> ref_by_seed;
    std::set<std::pair<std::string, std::uint64_t>> cells_seen;
    std::string bhash;

    for (const fs::path& dir : opt.inputs) {
        const fs::path mpath = dir / "manifest.json";
        if (!fs::exists(mpath))
            throw ConfigError(dir.string() + " is not a run output dir (no manifest.json)");
        const json manifest = parse_json_file(mpath);
        if (!manifest.is_object() || !manifest.contains("bundle_hash") ||
            !manifest["bundle_hash"].is_string())
            throw ParseError(mpath.string() + ": missing bundle_hash");
        const std::string h = manifest["bundle_hash"].get<std::string>();
        if (bhash.empty())
            bhash = h;
        else if (bhash != h)
            throw ConfigError("input dirs mix different bundles: " + dir.string() +
                              " has bundle_hash " + h + ", expected " + bhash);

        const fs::path rpath = dir / "results.csv";
        if (!fs::exists(rpath)) throw ConfigError(dir.string() + " has no results.csv");
        std::vector<ResultRow> r = parse_results_csv(rpath);
        std::set<std::pair<std::string, std::uint64_t>> here;
        for (const ResultRow& row : r) here.emplace(row.strategy, row.seed);
        for (const auto& cell : here)
            if (!cells_seen.insert(cell).second)
                throw ConfigError("cell " + cell.first + " seed " + std::to_string(cell.second) +
                                  " appears in more than one input dir");
        rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                    std::make_move_iterator(r.end()));

        const fs::path dpath = dir / "diversity.csv";
        if (fs::exists(dpath)) {
            std::vector<DiversityRow> d = parse_diversity_csv(dpath);
            diversity.insert(diversity.end(), std::make_move_iterator(d.begin()),
                             std::make_move_iterator(d.end()));
        }
        const fs::path fpath = dir / "reference.csv";
        if (fs::exists(fpath)) {
            for (const ReferenceRow& row : parse_reference_csv(fpath)) {
                const auto it = ref_by_seed.find(row.seed);
                if (it == ref_by_seed.end()) {
                    ref_by_seed.emplace(row.seed, row);
                } else if (it->second.test_accuracy != row.test_accuracy ||
                           it->second.train_epochs != row.train_epochs) {
                    throw ConfigError("conflicting reference rows for seed " +
                                      std::to_string(row.seed) + " across input dirs");
                }
            }
        }
    }
    for (const auto& [seed, row] : ref_by_seed) references.push_back(row);

    const std::vector<StrategyCurve> curves = build_curves(rows);
    write_report(rows, curves, diversity, references, bhash, opt.out, opt.svg);
    std::cout << "report " << (opt.out / "summary.json").string() << "\n";
    return 0;
}

}  // namespace tplab
