#include "tplab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tplab/decimal.hpp"
#include "tplab/errors.hpp"
#include "tplab/metrics.hpp"

namespace tplab {

using nlohmann::json;

std::string csv_of(const ResultRow& r) {
    std::ostringstream os;
    os << r.strategy << ',' << r.seed << ',' << r.cycle << ',' << r.drive_id << ','
       << r.n_selected << ',' << r.labeled_count << ',' << format_double(r.labeled_fraction) << ','
       << format_double(r.test_accuracy) << ',' << format_double(r.selection_seconds) << ','
       << r.train_epochs;
    return os.str();
}

std::string csv_of(const DiversityRow& r) {
    std::ostringstream os;
    os << r.strategy << ',' << r.seed << ',' << r.cycle << ',' << r.drive_id << ','
       << r.n_selected << ',' << format_double(r.mean_pairwise) << ','
       << format_double(r.covering_radius);
    return os.str();
}

std::string csv_of(const ReferenceRow& r) {
    std::ostringstream os;
    os << r.seed << ',' << format_double(r.test_accuracy) << ',' << r.train_epochs;
    return os.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

template <typename T>
T parse_integer(const std::string& s, const std::string& context) {
    T value{};
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(context + ": not an integer: '" + s + "'");
    return value;
}

class CsvReader {
  public:
    CsvReader(const std::filesystem::path& path, const char* header) : path_(path.string()) {
        in_.open(path);
        if (!in_) throw IoError("cannot open: " + path_);
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line[0] == '#') continue;
            if (line != header)
                throw ParseError(path_ + " line " + std::to_string(line_no_) +
                                 ": expected header '" + std::string(header) + "'");
            return;
        }
        throw ParseError(path_ + ": missing header");
    }

    bool next(std::vector<std::string>& fields, std::size_t n_fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty() || line[0] == '#') continue;
            fields = split_csv(line);
            if (fields.size() != n_fields)
                throw ParseError(where() + ": expected " + std::to_string(n_fields) +
                                 " fields, found " + std::to_string(fields.size()));
            return true;
        }
        return false;
    }

    std::string where() const { return path_ + " line " + std::to_string(line_no_); }

  private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

}  // namespace

std::vector<ResultRow> parse_results_csv(const std::filesystem::path& path) {
    CsvReader reader(path, kResultsHeader);
    std::vector<ResultRow> rows;
    std::vector<std::string> f;
    while (reader.next(f, 10)) {
        ResultRow r;
        r.strategy = f[0];
        r.seed = parse_integer<std::uint64_t>(f[1], reader.where());
        r.cycle = parse_integer<int>(f[2], reader.where());
        r.drive_id = f[3];
        r.n_selected = parse_integer<std::size_t>(f[4], reader.where());
        r.labeled_count = parse_integer<std::size_t>(f[5], reader.where());
        r.labeled_fraction = parse_double(f[6], reader.where());
        r.test_accuracy = parse_double(f[7], reader.where());
        r.selection_seconds = parse_double(f[8], reader.where());
        r.train_epochs = parse_integer<int>(f[9], reader.where());
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<DiversityRow> parse_diversity_csv(const std::filesystem::path& path) {
    CsvReader reader(path, kDiversityHeader);
    std::vector<DiversityRow> rows;
    std::vector<std::string> f;
    while (reader.next(f, 7)) {
        DiversityRow r;
        r.strategy = f[0];
        r.seed = parse_integer<std::uint64_t>(f[1], reader.where());
        r.cycle = parse_integer<int>(f[2], reader.where());
        r.drive_id = f[3];
        r.n_selected = parse_integer<std::size_t>(f[4], reader.where());
        r.mean_pairwise = parse_double(f[5], reader.where());
        r.covering_radius = parse_double(f[6], reader.where());
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ReferenceRow> parse_reference_csv(const std::filesystem::path& path) {
    CsvReader reader(path, kReferenceHeader);
    std::vector<ReferenceRow> rows;
    std::vector<std::string> f;
    while (reader.next(f, 3)) {
        ReferenceRow r;
        r.seed = parse_integer<std::uint64_t>(f[0], reader.where());
        r.test_accuracy = parse_double(f[1], reader.where());
        r.train_epochs = parse_integer<int>(f[2], reader.where());
        rows.push_back(r);
    }
    return rows;
}

std::vector<StrategyCurve> build_curves(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw ConfigError("no result rows to aggregate");
    std::map<std::string, std::map<std::uint64_t, std::map<int, const ResultRow*>>> grouped;
    for (const ResultRow& r : rows) {
        auto& cell = grouped[r.strategy][r.seed];
        if (!cell.emplace(r.cycle, &r).second)
            throw ConfigError("duplicate row for " + r.strategy + " seed " +
                              std::to_string(r.seed) + " cycle " + std::to_string(r.cycle));
    }
    std::vector<double> grid;
    std::string grid_owner;
    std::vector<StrategyCurve> curves;
    for (const auto& [strategy, by_seed] : grouped) {
        StrategyCurve curve;
        curve.strategy = strategy;
        for (const auto& [seed, by_cycle] : by_seed) {
            std::vector<double> fr, acc;
            for (const auto& [cycle, row] : by_cycle) {
                fr.push_back(row->labeled_fraction);
                acc.push_back(row->test_accuracy);
            }
            const std::string run_name = strategy + " seed " + std::to_string(seed);
            if (grid.empty()) {
                grid = fr;
                grid_owner = run_name;
            } else if (fr != grid) {
                throw ConfigError("run " + run_name +
                                  " has a labeled_fraction grid different from " + grid_owner);
            }
            curve.seeds.push_back(seed);
            curve.acc.push_back(std::move(acc));
        }
        curve.fractions = grid;
        curves.push_back(std::move(curve));
    }
    return curves;
}

namespace {

json json_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

struct Palette {
    static const char* color(std::size_t i) {
        static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                        "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"};
        return kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
    }
};

void write_svg(const std::vector<StrategyCurve>& curves,
               const std::vector<ReferenceRow>& references,
               const std::filesystem::path& path) {
    const double w = 720, h = 480, ml = 64, mr = 160, mt = 24, mb = 48;
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
    for (const StrategyCurve& c : curves) {
        for (const double x : c.fractions) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
        }
        for (const auto& run : c.acc)
            for (const double y : run) {
                y_lo = std::min(y_lo, y);
                y_hi = std::max(y_hi, y);
            }
    }
    for (const ReferenceRow& r : references) {
        y_lo = std::min(y_lo, r.test_accuracy);
        y_hi = std::max(y_hi, r.test_accuracy);
    }
    if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
    const double pad = std::max(0.01, (y_hi - y_lo) * 0.08);
    y_lo -= pad;
    y_hi += pad;
    const auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr); };
    const auto py = [&](double y) { return h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = x_lo + (x_hi - x_lo) * i / 5.0;
        const double fy = y_lo + (y_hi - y_lo) * i / 5.0;
        out << "<text x=\"" << px(fx) << "\" y=\"" << h - mb + 20
            << "\" font-size=\"11\" text-anchor=\"middle\">" << format_double(std::round(fx * 1000) / 1000)
            << "</text>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(std::round(fy * 1000) / 1000)
            << "</text>\n";
    }
    out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 10
        << "\" font-size=\"12\" text-anchor=\"middle\">labeled fraction</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (mt + h - mb) / 2 << ")\">test accuracy</text>\n";

    if (!references.empty()) {
        double mean = 0.0;
        for (const ReferenceRow& r : references) mean += r.test_accuracy;
        mean /= static_cast<double>(references.size());
        out << "<line x1=\"" << ml << "\" y1=\"" << py(mean) << "\" x2=\"" << w - mr << "\" y2=\""
            << py(mean) << "\" stroke=\"#444\" stroke-dasharray=\"6 4\"/>\n";
        out << "<text x=\"" << w - mr + 8 << "\" y=\"" << py(mean) + 4
            << "\" font-size=\"11\">full data</text>\n";
    }

    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const StrategyCurve& c = curves[ci];
        std::vector<double> mean(c.fractions.size(), 0.0);
        for (const auto& run : c.acc)
            for (std::size_t i = 0; i < run.size(); ++i) mean[i] += run[i];
        for (double& v : mean) v /= static_cast<double>(c.acc.size());
        out << "<polyline fill=\"none\" stroke=\"" << Palette::color(ci)
            << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < c.fractions.size(); ++i)
            out << px(c.fractions[i]) << "," << py(mean[i]) << " ";
        out << "\"/>\n";
        const double ly = mt + 18 + 18 * static_cast<double>(ci);
        out << "<line x1=\"" << w - mr + 8 << "\" y1=\"" << ly - 4 << "\" x2=\"" << w - mr + 28
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << Palette::color(ci)
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << w - mr + 34 << "\" y=\"" << ly << "\" font-size=\"12\">"
            << c.strategy << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void write_report(const std::vector<ResultRow>& rows, const std::vector<StrategyCurve>& curves,
                  const std::vector<DiversityRow>& diversity,
                  const std::vector<ReferenceRow>& references, const std::string& bundle_hash,
                  const std::filesystem::path& out_dir, bool with_svg) {
    std::filesystem::create_directories(out_dir);
    std::map<std::uint64_t, double> ref_by_seed;
    for (const ReferenceRow& r : references) ref_by_seed[r.seed] = r.test_accuracy;

    json summary;
    summary["version"] = 1;
    summary["bundle_hash"] = bundle_hash;
    json strategies = json::object();

    std::ofstream curves_csv(out_dir / "curves.csv", std::ios::binary);
    if (!curves_csv) throw IoError("cannot open for writing: " + (out_dir / "curves.csv").string());
    curves_csv << "# bundle_hash=" << bundle_hash << "\n";
    curves_csv << "strategy,fraction,mean_accuracy,stderr_accuracy,n_seeds\n";

    for (const StrategyCurve& c : curves) {
        const std::size_t n_pts = c.fractions.size();
        std::vector<double> mean_acc(n_pts), se_acc(n_pts);
        for (std::size_t i = 0; i < n_pts; ++i) {
            std::vector<double> col;
            col.reserve(c.acc.size());
            for (const auto& run : c.acc) col.push_back(run[i]);
            const MeanErr me = mean_stderr(col);
            mean_acc[i] = me.mean;
            se_acc[i] = me.se;
            curves_csv << c.strategy << ',' << format_double(c.fractions[i]) << ','
                       << format_double(me.mean) << ',' << format_double(me.se) << ','
                       << c.acc.size() << "\n";
        }
        std::vector<double> aucs, finals;
        for (const auto& run : c.acc) {
            aucs.push_back(trapezoid_auc(c.fractions, run));
            finals.push_back(run.back());
        }
        const MeanErr auc_me = mean_stderr(aucs);
        const MeanErr fin_me = mean_stderr(finals);

        json s;
        s["seeds"] = c.seeds;
        s["fractions"] = c.fractions;
        s["mean_accuracy"] = mean_acc;
        s["stderr_accuracy"] = se_acc;
        s["auc"] = {{"mean", auc_me.mean}, {"stderr", auc_me.se}, {"per_seed", aucs}};
        s["final_accuracy"] = {{"mean", fin_me.mean}, {"stderr", fin_me.se}};
        if (!ref_by_seed.empty()) {
            json per_seed = json::array();
            double sum = 0.0;
            bool all_finite = true;
            for (std::size_t r = 0; r < c.seeds.size(); ++r) {
                const auto it = ref_by_seed.find(c.seeds[r]);
                if (it == ref_by_seed.end()) {
                    per_seed.push_back(nullptr);
                    all_finite = false;
                    continue;
                }
                const double x = intersection_fraction(c.fractions, c.acc[r], it->second);
                per_seed.push_back(json_or_null(x));
                if (std::isfinite(x))
                    sum += x;
                else
                    all_finite = false;
            }
            s["intersection"] = {
                {"per_seed", per_seed},
                {"mean", all_finite && !c.seeds.empty()
                             ? json(sum / static_cast<double>(c.seeds.size()))
                             : json(nullptr)}};
        }
        strategies[c.strategy] = std::move(s);
    }
    if (!curves_csv) throw IoError("write failed: " + (out_dir / "curves.csv").string());
    summary["strategies"] = std::move(strategies);

    {
        // Mean wall-clock selection time per strategy, over cycles that
        // actually selected frames.
        std::map<std::string, std::pair<double, std::size_t>> timing;
        for (const ResultRow& r : rows) {
            if (r.n_selected == 0) continue;
            auto& [sum, n] = timing[r.strategy];
            sum += r.selection_seconds;
            ++n;
        }
        std::ofstream tim(out_dir / "timing_summary.csv", std::ios::binary);
        if (!tim)
            throw IoError("cannot open for writing: " + (out_dir / "timing_summary.csv").string());
        tim << "# bundle_hash=" << bundle_hash << "\n";
        tim << "strategy,mean_selection_seconds,n_cycles\n";
        json jtim = json::object();
        for (const auto& [strategy, acc] : timing) {
            const double mean = acc.first / static_cast<double>(acc.second);
            tim << strategy << ',' << format_double(mean) << ',' << acc.second << "\n";
            jtim[strategy] = {{"mean_selection_seconds", mean}, {"n_cycles", acc.second}};
        }
        if (!tim) throw IoError("write failed: " + (out_dir / "timing_summary.csv").string());
        summary["selection_time"] = std::move(jtim);
    }

    if (!references.empty()) {
        std::vector<double> accs;
        json seeds = json::array();
        for (const ReferenceRow& r : references) {
            accs.push_back(r.test_accuracy);
            seeds.push_back(r.seed);
        }
        const MeanErr me = mean_stderr(accs);
        summary["reference"] = {{"seeds", seeds}, {"mean_accuracy", me.mean}, {"stderr", me.se}};
    }

    if (!diversity.empty()) {
        std::map<std::string, std::vector<const DiversityRow*>> by_strategy;
        for (const DiversityRow& r : diversity) by_strategy[r.strategy].push_back(&r);
        std::ofstream div(out_dir / "diversity_summary.csv", std::ios::binary);
        if (!div)
            throw IoError("cannot open for writing: " +
                          (out_dir / "diversity_summary.csv").string());
        div << "# bundle_hash=" << bundle_hash << "\n";
        div << "strategy,mean_pairwise,covering_radius,n_batches\n";
        json jdiv = json::object();
        for (const auto& [strategy, rows] : by_strategy) {
            double mp = 0.0, cr = 0.0;
            for (const DiversityRow* r : rows) {
                mp += r->mean_pairwise;
                cr += r->covering_radius;
            }
            mp /= static_cast<double>(rows.size());
            cr /= static_cast<double>(rows.size());
            div << strategy << ',' << format_double(mp) << ',' << format_double(cr) << ','
                << rows.size() << "\n";
            jdiv[strategy] = {{"mean_pairwise", mp},
                              {"covering_radius", cr},
                              {"n_batches", rows.size()}};
        }
        if (!div)
            throw IoError("write failed: " + (out_dir / "diversity_summary.csv").string());
        summary["diversity"] = std::move(jdiv);
    }

    std::ofstream js(out_dir / "summary.json", std::ios::binary);
    if (!js) throw IoError("cannot open for writing: " + (out_dir / "summary.json").string());
    js << summary.dump(2) << "\n";
    if (!js) throw IoError("write failed: " + (out_dir / "summary.json").string());

    if (with_svg) write_svg(curves, references, out_dir / "curves.svg");
}

}  // namespace tplab
