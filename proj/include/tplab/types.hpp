#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tplab {

// One timestamped observation on a drive.
struct Frame {
    double t = 0.0;            // seconds, strictly increasing within a drive
    std::vector<double> x;     // feature vector
    int y = 0;                 // class label in [0, n_classes)
};

// A temporally ordered recording, the unit the stream scenarios consume.
struct Drive {
    std::string id;
    std::vector<Frame> frames;
};

// Synthetic stream generator settings.
struct GenConfig {
    int n_classes = 6;
    int feature_dim = 8;
    double rate_hz = 10.0;
    // Empty means: derive n_classes centers from the seed.
    std::vector<std::vector<double>> class_centers;
    int waypoint_count = 6;
    double noise_sigma = 0.55;      // stationary std dev of the OU noise
    double ou_theta = 1.5;          // OU mean-reversion rate (1/s)
    double drive_length_s = 40.0;
    int n_unlabeled_drives = 4;
    double speed = 2.5;             // travel speed between waypoints
    double dwell_min_s = 1.2;       // minimum pause at each waypoint
    double jitter_frac = 0.05;      // timestamp jitter, fraction of 1/rate_hz
    bool full_coverage = true;      // every class center visited per drive
    double center_radius = 3.0;     // scale of seed-derived centers
    std::uint64_t seed = 1;
};

// Generated dataset: one drive group per split. `unlabeled` keeps cycle order.
struct DatasetBundle {
    std::vector<Drive> initial_labeled;
    std::vector<Drive> unlabeled;
    std::vector<Drive> val;
    std::vector<Drive> test;
    GenConfig meta;
};

// Flat labeled collection for training and evaluation. Row-major features.
struct FrameSet {
    std::size_t dim = 0;
    std::vector<double> xs;
    std::vector<int> ys;

    std::size_t size() const { return ys.size(); }
    const double* x(std::size_t i) const { return xs.data() + i * dim; }

    void add(const double* x_in, int y_in) {
        xs.insert(xs.end(), x_in, x_in + dim);
        ys.push_back(y_in);
    }
    void add(const Frame& f) { add(f.x.data(), f.y); }

    void add_drive(const Drive& d) {
        for (const Frame& f : d.frames) add(f);
    }
};

inline FrameSet frame_set_of(const std::vector<Drive>& drives, std::size_t dim) {
    FrameSet s;
    s.dim = dim;
    for (const Drive& d : drives) s.add_drive(d);
    return s;
}

// Position of one frame inside a bundle.
struct FrameRef {
    std::string drive_id;
    std::size_t index = 0;

    friend bool operator==(const FrameRef& a, const FrameRef& b) {
        return a.index == b.index && a.drive_id == b.drive_id;
    }
    friend bool operator<(const FrameRef& a, const FrameRef& b) {
        if (a.drive_id != b.drive_id) return a.drive_id < b.drive_id;
        return a.index < b.index;
    }
};

}  // namespace tplab
