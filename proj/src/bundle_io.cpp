#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tplab/decimal.hpp"
#include "tplab/errors.hpp"
#include "tplab/streamgen.hpp"

namespace tplab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kBundleVersion = 1;

std::string drive_filename(const std::string& id) { return id + ".jsonl"; }

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string drive_to_jsonl(const Drive& d) {
    std::string out;
    for (const Frame& f : d.frames) {
        out += "{\"t\":\"";
        out += format_double(f.t);
        out += "\",\"x\":[";
        for (std::size_t i = 0; i < f.x.size(); ++i) {
            if (i) out += ',';
            out += '"';
            out += format_double(f.x[i]);
            out += '"';
        }
        out += "],\"y\":";
        out += std::to_string(f.y);
        out += "}\n";
    }
    return out;
}

Drive drive_from_jsonl(const std::string& id, const std::string& content,
                       const std::string& file_label) {
    Drive d;
    d.id = id;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = file_label + " line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (!j.is_object() || j.size() != 3 || !j.contains("t") || !j.contains("x") || !j.contains("y"))
            throw ParseError(where + ": expected exactly the fields t, x, y");
        if (!j["t"].is_string()) throw ParseError(where + ": field t must be a decimal string");
        if (!j["x"].is_array()) throw ParseError(where + ": field x must be an array");
        if (!j["y"].is_number_integer()) throw ParseError(where + ": field y must be an integer");
        Frame f;
        f.t = parse_double(j["t"].get<std::string>(), where + " field t");
        for (const auto& v : j["x"]) {
            if (!v.is_string()) throw ParseError(where + ": field x must hold decimal strings");
            f.x.push_back(parse_double(v.get<std::string>(), where + " field x"));
        }
        f.y = j["y"].get<int>();
        d.frames.push_back(std::move(f));
    }
    return d;
}

}  // namespace

json gen_to_json(const GenConfig& cfg) {
    json j;
    j["n_classes"] = cfg.n_classes;
    j["feature_dim"] = cfg.feature_dim;
    j["rate_hz"] = cfg.rate_hz;
    j["class_centers"] = json::array();
    for (const auto& c : cfg.class_centers) {
        json row = json::array();
        for (const double v : c) row.push_back(format_double(v));
        j["class_centers"].push_back(row);
    }
    j["waypoint_count"] = cfg.waypoint_count;
    j["noise_sigma"] = cfg.noise_sigma;
    j["ou_theta"] = cfg.ou_theta;
    j["drive_length_s"] = cfg.drive_length_s;
    j["n_unlabeled_drives"] = cfg.n_unlabeled_drives;
    j["speed"] = cfg.speed;
    j["dwell_min_s"] = cfg.dwell_min_s;
    j["jitter_frac"] = cfg.jitter_frac;
    j["full_coverage"] = cfg.full_coverage;
    j["center_radius"] = cfg.center_radius;
    j["seed"] = cfg.seed;
    return j;
}

GenConfig gen_from_json(const json& j, const std::string& where) {
    static const std::set<std::string> known = {
        "n_classes",   "feature_dim",  "rate_hz",       "class_centers",
        "waypoint_count", "noise_sigma", "ou_theta",    "drive_length_s",
        "n_unlabeled_drives", "speed", "dwell_min_s",   "jitter_frac",
        "full_coverage", "center_radius", "seed"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ParseError(where + ": unknown field '" + key + "'");
    GenConfig cfg;
    try {
        if (j.contains("n_classes")) cfg.n_classes = j["n_classes"].get<int>();
        if (j.contains("feature_dim")) cfg.feature_dim = j["feature_dim"].get<int>();
        if (j.contains("rate_hz")) cfg.rate_hz = j["rate_hz"].get<double>();
        if (j.contains("class_centers"))
            for (const auto& row : j["class_centers"]) {
                std::vector<double> c;
                for (const auto& v : row)
                    c.push_back(v.is_string()
                                    ? parse_double(v.get<std::string>(), where + " class_centers")
                                    : v.get<double>());
                cfg.class_centers.push_back(std::move(c));
            }
        if (j.contains("waypoint_count")) cfg.waypoint_count = j["waypoint_count"].get<int>();
        if (j.contains("noise_sigma")) cfg.noise_sigma = j["noise_sigma"].get<double>();
        if (j.contains("ou_theta")) cfg.ou_theta = j["ou_theta"].get<double>();
        if (j.contains("drive_length_s")) cfg.drive_length_s = j["drive_length_s"].get<double>();
        if (j.contains("n_unlabeled_drives"))
            cfg.n_unlabeled_drives = j["n_unlabeled_drives"].get<int>();
        if (j.contains("speed")) cfg.speed = j["speed"].get<double>();
        if (j.contains("dwell_min_s")) cfg.dwell_min_s = j["dwell_min_s"].get<double>();
        if (j.contains("jitter_frac")) cfg.jitter_frac = j["jitter_frac"].get<double>();
        if (j.contains("full_coverage")) cfg.full_coverage = j["full_coverage"].get<bool>();
        if (j.contains("center_radius")) cfg.center_radius = j["center_radius"].get<double>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
    return cfg;
}

namespace {

std::vector<std::string> ids_of(const std::vector<Drive>& drives) {
    std::vector<std::string> ids;
    for (const Drive& d : drives) ids.push_back(d.id);
    return ids;
}

std::vector<Drive> load_split(const fs::path& dir, const json& ids) {
    std::vector<Drive> out;
    for (const auto& id : ids) {
        const std::string name = id.get<std::string>();
        const fs::path file = dir / drive_filename(name);
        out.push_back(drive_from_jsonl(name, read_file(file), file.filename().string()));
    }
    return out;
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory: " + dir.string());

    std::set<std::string> seen;
    const std::vector<const std::vector<Drive>*> groups = {
        &bundle.initial_labeled, &bundle.unlabeled, &bundle.val, &bundle.test};
    for (const auto* group : groups)
        for (const Drive& d : *group) {
            if (!seen.insert(d.id).second)
                throw ConfigError("duplicate drive id in bundle: " + d.id);
            if (d.frames.empty()) throw ConfigError("drive " + d.id + " has no frames");
            write_file(dir / drive_filename(d.id), drive_to_jsonl(d));
        }

    json manifest;
    manifest["version"] = kBundleVersion;
    manifest["splits"] = {{"initial_labeled", ids_of(bundle.initial_labeled)},
                          {"unlabeled", ids_of(bundle.unlabeled)},
                          {"val", ids_of(bundle.val)},
                          {"test", ids_of(bundle.test)}};
    manifest["gen"] = gen_to_json(bundle.meta);
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetBundle load_bundle(const fs::path& dir) {
    const fs::path mf = dir / "manifest.json";
    json manifest;
    try {
        manifest = json::parse(read_file(mf));
    } catch (const json::exception& e) {
        throw ParseError("manifest.json: " + std::string(e.what()));
    }
    if (!manifest.contains("version") || !manifest["version"].is_number_integer())
        throw ParseError("manifest.json: missing integer field 'version'");
    const int version = manifest["version"].get<int>();
    if (version != kBundleVersion)
        throw ParseError("manifest.json: unsupported bundle version " + std::to_string(version) +
                         ", expected " + std::to_string(kBundleVersion));
    if (!manifest.contains("splits") || !manifest.contains("gen"))
        throw ParseError("manifest.json: missing field 'splits' or 'gen'");

    DatasetBundle bundle;
    const json& splits = manifest["splits"];
    for (const char* key : {"initial_labeled", "unlabeled", "val", "test"})
        if (!splits.contains(key))
            throw ParseError(std::string("manifest.json: splits missing '") + key + "'");
    bundle.initial_labeled = load_split(dir, splits["initial_labeled"]);
    bundle.unlabeled = load_split(dir, splits["unlabeled"]);
    bundle.val = load_split(dir, splits["val"]);
    bundle.test = load_split(dir, splits["test"]);
    bundle.meta = gen_from_json(manifest["gen"], "manifest.json gen");
    return bundle;
}

std::string bundle_hash(const fs::path& dir) {
    const std::string manifest_bytes = read_file(dir / "manifest.json");
    Fnv1a64 h;
    h.update(manifest_bytes);
    json manifest;
    try {
        manifest = json::parse(manifest_bytes);
    } catch (const json::exception& e) {
        throw ParseError("manifest.json: " + std::string(e.what()));
    }
    for (const char* key : {"initial_labeled", "unlabeled", "val", "test"})
        for (const auto& id : manifest.at("splits").at(key))
            h.update(read_file(dir / drive_filename(id.get<std::string>())));
    return h.hex();
}

}  // namespace tplab
