#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tplab/commands.hpp"
#include "tplab/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"stream active learning laboratory"};
    app.require_subcommand(1);

    std::string gen_config, gen_out;
    std::uint64_t gen_seed = 0;
    int gen_classes = 0, gen_dim = 0, gen_drives = 0, gen_waypoints = 0;
    double gen_rate = 0.0, gen_len = 0.0, gen_sigma = 0.0;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic drive bundle");
    gen->add_option("--config", gen_config, "generator config JSON file");
    gen->add_option("--out", gen_out, "bundle output dir")->required();
    CLI::Option* f_seed = gen->add_option("--seed", gen_seed, "generator seed");
    CLI::Option* f_classes = gen->add_option("--n-classes", gen_classes, "number of classes");
    CLI::Option* f_dim = gen->add_option("--feature-dim", gen_dim, "feature dimension");
    CLI::Option* f_rate = gen->add_option("--rate-hz", gen_rate, "frames per second");
    CLI::Option* f_len = gen->add_option("--drive-length-s", gen_len, "drive length in seconds");
    CLI::Option* f_drives =
        gen->add_option("--n-unlabeled-drives", gen_drives, "number of stream drives");
    CLI::Option* f_sigma = gen->add_option("--noise-sigma", gen_sigma, "feature noise std dev");
    CLI::Option* f_way = gen->add_option("--waypoint-count", gen_waypoints, "waypoints per drive");

    std::string run_config, run_out;
    CLI::App* run = app.add_subcommand("run", "run a strategy x seed grid over a bundle");
    run->add_option("--config", run_config, "run config JSON file")->required();
    run->add_option("--out", run_out, "output dir")->required();

    std::vector<std::string> rep_inputs;
    std::string rep_out;
    bool rep_svg = false;
    CLI::App* rep = app.add_subcommand("report", "aggregate run outputs into a report");
    rep->add_option("--input", rep_inputs, "run output dir (repeatable)")->required();
    rep->add_option("--out", rep_out, "report output dir")->required();
    rep->add_flag("--svg", rep_svg, "also write curves.svg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            tplab::GenOptions opt;
            if (!gen_config.empty()) opt.config = gen_config;
            opt.out = gen_out;
            if (*f_seed) opt.overrides["seed"] = gen_seed;
            if (*f_classes) opt.overrides["n_classes"] = gen_classes;
            if (*f_dim) opt.overrides["feature_dim"] = gen_dim;
            if (*f_rate) opt.overrides["rate_hz"] = gen_rate;
            if (*f_len) opt.overrides["drive_length_s"] = gen_len;
            if (*f_drives) opt.overrides["n_unlabeled_drives"] = gen_drives;
            if (*f_sigma) opt.overrides["noise_sigma"] = gen_sigma;
            if (*f_way) opt.overrides["waypoint_count"] = gen_waypoints;
            return tplab::cmd_gen(opt);
        }
        if (run->parsed()) {
            tplab::RunOptions opt;
            opt.config = run_config;
            opt.out = run_out;
            return tplab::cmd_run(opt);
        }
        tplab::ReportOptions opt;
        for (const std::string& s : rep_inputs) opt.inputs.emplace_back(s);
        opt.out = rep_out;
        opt.svg = rep_svg;
        return tplab::cmd_report(opt);
    } catch (const tplab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tplab::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const tplab::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const tplab::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
