#include "tplab/streamgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tplab/errors.hpp"
#include "tplab/kernels.hpp"

namespace tplab {

void validate(const GenConfig& cfg) {
    if (cfg.n_classes < 2) throw ConfigError("gen.n_classes must be >= 2");
    if (cfg.feature_dim < 2) throw ConfigError("gen.feature_dim must be >= 2");
    if (!(cfg.rate_hz > 0.0)) throw ConfigError("gen.rate_hz must be > 0");
    if (!cfg.class_centers.empty()) {
        if (cfg.class_centers.size() != static_cast<std::size_t>(cfg.n_classes))
            throw ConfigError("gen.class_centers must have n_classes entries");
        for (const auto& c : cfg.class_centers) {
            if (c.size() != static_cast<std::size_t>(cfg.feature_dim))
                throw ConfigError("gen.class_centers entries must have feature_dim values");
            for (const double v : c)
                if (!std::isfinite(v)) throw ConfigError("gen.class_centers must be finite");
        }
        for (std::size_t i = 0; i < cfg.class_centers.size(); ++i)
            for (std::size_t j = i + 1; j < cfg.class_centers.size(); ++j)
                if (cfg.class_centers[i] == cfg.class_centers[j])
                    throw ConfigError("gen.class_centers must be pairwise distinct");
    }
    if (cfg.waypoint_count < 1) throw ConfigError("gen.waypoint_count must be >= 1");
    if (cfg.full_coverage && cfg.waypoint_count < cfg.n_classes)
        throw ConfigError("gen.waypoint_count must be >= n_classes for full coverage");
    if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("gen.noise_sigma must be >= 0");
    if (!(cfg.ou_theta > 0.0)) throw ConfigError("gen.ou_theta must be > 0");
    if (!(cfg.drive_length_s > 0.0)) throw ConfigError("gen.drive_length_s must be > 0");
    if (cfg.n_unlabeled_drives < 1) throw ConfigError("gen.n_unlabeled_drives must be >= 1");
    if (!(cfg.speed > 0.0)) throw ConfigError("gen.speed must be > 0");
    if (!(cfg.dwell_min_s > 0.0)) throw ConfigError("gen.dwell_min_s must be > 0");
    if (!(cfg.jitter_frac >= 0.0) || cfg.jitter_frac > 0.4)
        throw ConfigError("gen.jitter_frac must be in [0, 0.4]");
    if (!(cfg.center_radius > 0.0)) throw ConfigError("gen.center_radius must be > 0");
}

std::vector<std::vector<double>> class_centers_of(const GenConfig& cfg) {
    if (!cfg.class_centers.empty()) return cfg.class_centers;
    // Seed-placed centers on the radius-R sphere, re-drawn until every pair is
    // at least R apart so labels are driven by the tour, not by center luck.
    Rng rng = Rng(cfg.seed).split("centers");
    const double min_dist2 = cfg.center_radius * cfg.center_radius;
    std::vector<std::vector<double>> centers;
    int tries = 0;
    while (centers.size() < static_cast<std::size_t>(cfg.n_classes)) {
        if (++tries > 1000)
            throw ConfigError("could not place class centers with the required separation");
        std::vector<double> c(static_cast<std::size_t>(cfg.feature_dim));
        for (double& v : c) v = rng.normal();
        const double norm = std::sqrt(kern::dot(c.data(), c.data(), c.size()));
        if (norm == 0.0) continue;
        kern::scale(cfg.center_radius / norm, c.data(), c.size());
        bool ok = true;
        for (const auto& prev : centers)
            if (kern::sq_dist(prev.data(), c.data(), c.size()) < min_dist2) ok = false;
        if (ok) centers.push_back(std::move(c));
    }
    return centers;
}

namespace {

struct Segment {
    double t0, t1;
    const std::vector<double>*a, *b;  // a == b for a dwell
};

std::vector<int> waypoint_tour(const GenConfig& cfg, Rng rng) {
    std::vector<int> tour;
    if (cfg.full_coverage) {
        tour.resize(static_cast<std::size_t>(cfg.n_classes));
        std::iota(tour.begin(), tour.end(), 0);
        rng.shuffle(tour);
    }
    while (tour.size() < static_cast<std::size_t>(cfg.waypoint_count)) {
        const int next = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(cfg.n_classes)));
        if (!tour.empty() && next == tour.back()) continue;
        tour.push_back(next);
    }
    return tour;
}

void position_at(const std::vector<Segment>& segs, double t, std::size_t& cursor,
                 std::vector<double>& out) {
    while (cursor + 1 < segs.size() && t > segs[cursor].t1) ++cursor;
    const Segment& s = segs[cursor];
    if (s.a == s.b || s.t1 <= s.t0) {
        out = *s.a;
        return;
    }
    const double w = std::clamp((t - s.t0) / (s.t1 - s.t0), 0.0, 1.0);
    out.resize(s.a->size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (*s.a)[i] + w * ((*s.b)[i] - (*s.a)[i]);
}

}  // namespace

Drive gen_drive(const GenConfig& cfg, const std::string& id, const Rng& rng) {
    validate(cfg);
    const auto centers = class_centers_of(cfg);
    const std::vector<int> tour = waypoint_tour(cfg, rng.split("waypoints"));
    const std::size_t n_wp = tour.size();

    // Fit the tour into drive_length_s: travel legs run at constant speed,
    // the remaining time is split into dwells with randomized proportions.
    std::vector<double> travel(n_wp - 1, 0.0);
    double total_travel = 0.0;
    for (std::size_t j = 0; j + 1 < n_wp; ++j) {
        const auto& a = centers[static_cast<std::size_t>(tour[j])];
        const auto& b = centers[static_cast<std::size_t>(tour[j + 1])];
        travel[j] = std::sqrt(kern::sq_dist(a.data(), b.data(), a.size())) / cfg.speed;
        total_travel += travel[j];
    }
    const double dwell_budget = cfg.drive_length_s - total_travel -
                                static_cast<double>(n_wp) * cfg.dwell_min_s;
    if (dwell_budget < 0.0)
        throw ConfigError("gen.drive_length_s too short for the waypoint tour of drive " + id);
    Rng dwell_rng = rng.split("dwell");
    std::vector<double> weights(n_wp);
    double weight_sum = 0.0;
    for (double& w : weights) {
        w = 0.5 + dwell_rng.uniform01();
        weight_sum += w;
    }

    std::vector<Segment> segs;
    double t_cursor = 0.0;
    for (std::size_t j = 0; j < n_wp; ++j) {
        const auto* wp = &centers[static_cast<std::size_t>(tour[j])];
        const double dwell = cfg.dwell_min_s + dwell_budget * weights[j] / weight_sum;
        segs.push_back({t_cursor, t_cursor + dwell, wp, wp});
        t_cursor += dwell;
        if (j + 1 < n_wp) {
            const auto* next = &centers[static_cast<std::size_t>(tour[j + 1])];
            segs.push_back({t_cursor, t_cursor + travel[j], wp, next});
            t_cursor += travel[j];
        }
    }

    const double dt = 1.0 / cfg.rate_hz;
    const auto n_frames = static_cast<std::size_t>(std::floor(cfg.drive_length_s * cfg.rate_hz));
    Rng jitter_rng = rng.split("jitter");
    Rng noise_rng = rng.split("noise");
    const std::size_t dim = static_cast<std::size_t>(cfg.feature_dim);

    Drive drive;
    drive.id = id;
    drive.frames.reserve(n_frames);
    std::vector<double> ou(dim, 0.0);
    for (double& z : ou) z = cfg.noise_sigma * noise_rng.normal();
    std::vector<double> clean;
    std::size_t cursor = 0;
    double prev_t = 0.0;
    for (std::size_t k = 0; k < n_frames; ++k) {
        Frame f;
        f.t = k == 0 ? 0.0
                     : static_cast<double>(k) * dt +
                           cfg.jitter_frac * dt * (2.0 * jitter_rng.uniform01() - 1.0);
        if (k > 0) {
            const double alpha = std::exp(-cfg.ou_theta * (f.t - prev_t));
            const double kick = cfg.noise_sigma * std::sqrt(1.0 - alpha * alpha);
            for (double& z : ou) z = alpha * z + kick * noise_rng.normal();
        }
        position_at(segs, f.t, cursor, clean);
        f.x.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) f.x[i] = clean[i] + ou[i];
        f.y = 0;
        double best = kern::sq_dist(centers[0].data(), f.x.data(), dim);
        for (int c = 1; c < cfg.n_classes; ++c) {
            const double d2 = kern::sq_dist(centers[static_cast<std::size_t>(c)].data(), f.x.data(), dim);
            if (d2 < best) {
                best = d2;
                f.y = c;
            }
        }
        prev_t = f.t;
        drive.frames.push_back(std::move(f));
    }

    const double flips = label_flip_rate(drive);
    if (flips > 1.0)
        throw ConfigError("gen config rejected: drive " + id + " label flip rate " +
                          std::to_string(flips) + "/s exceeds 1/s; lower noise_sigma or waypoint_count");
    if (cfg.full_coverage) {
        std::vector<bool> seen(static_cast<std::size_t>(cfg.n_classes), false);
        for (const Frame& f : drive.frames) seen[static_cast<std::size_t>(f.y)] = true;
        for (int c = 0; c < cfg.n_classes; ++c)
            if (!seen[static_cast<std::size_t>(c)])
                throw ConfigError("gen config rejected: drive " + id + " never shows class " +
                                  std::to_string(c) + "; raise drive_length_s or lower noise_sigma");
    }
    return drive;
}

double label_flip_rate(const Drive& d) {
    if (d.frames.size() < 2) return 0.0;
    std::size_t flips = 0;
    for (std::size_t k = 1; k < d.frames.size(); ++k)
        if (d.frames[k].y != d.frames[k - 1].y) ++flips;
    const double span = d.frames.back().t - d.frames.front().t;
    return span > 0.0 ? static_cast<double>(flips) / span : 0.0;
}

DatasetBundle gen_bundle(const GenConfig& cfg) {
    validate(cfg);
    const Rng root(cfg.seed);
    DatasetBundle bundle;
    bundle.meta = cfg;
    std::uint64_t drive_idx = 0;
    bundle.initial_labeled.push_back(gen_drive(cfg, "initial-0", root.split("drive", drive_idx++)));
    for (int i = 0; i < cfg.n_unlabeled_drives; ++i)
        bundle.unlabeled.push_back(
            gen_drive(cfg, "stream-" + std::to_string(i + 1), root.split("drive", drive_idx++)));
    bundle.val.push_back(gen_drive(cfg, "val-0", root.split("drive", drive_idx++)));
    bundle.test.push_back(gen_drive(cfg, "test-0", root.split("drive", drive_idx++)));
    return bundle;
}

}  // namespace tplab
