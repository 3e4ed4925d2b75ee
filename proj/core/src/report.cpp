#include "lightloc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lightloc/error.hpp"
#include "lightloc/rng.hpp"

namespace fs = std::filesystem;

namespace lightloc {

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

void write_manifest(const std::string& path, const std::string& config_hash, std::uint64_t seed,
                    const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "# lightloc manifest v1\n";
    out << "config_hash = " << config_hash << "\n";
    out << "seed = " << seed << "\n";
    out << "files = " << entries.size() << "\n";
    for (const ManifestEntry& e : entries) {
        out << e.checksum << "  " << e.path << "\n";
    }
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path, std::string* config_hash) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, path + " does not exist");
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
            std::istringstream ss(line.substr(0, eq));
            std::string key;
            ss >> key;
            if (key == "config_hash" && config_hash != nullptr) {
                std::istringstream vs(line.substr(eq + 1));
                vs >> *config_hash;
            }
            continue;
        }
        std::istringstream ss(line);
        ManifestEntry e;
        if (ss >> e.checksum >> e.path) entries.push_back(e);
    }
    return entries;
}

void write_metrics_csv(const std::string& path, const MetricTable& table,
                       const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "metric,value,config_hash\n";
    char buf[192];
    for (const auto& [name, value] : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%s\n", name.c_str(), value,
                      config_hash.c_str());
        out << buf;
    }
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

MetricTable read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, path + " does not exist");
    MetricTable table;
    table.stage = fs::path(path).stem().string();
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        const auto c1 = line.find(',');
        if (c1 == std::string::npos) continue;
        const auto c2 = line.find(',', c1 + 1);
        const std::string name = line.substr(0, c1);
        const std::string value = line.substr(c1 + 1, c2 == std::string::npos
                                                          ? std::string::npos
                                                          : c2 - c1 - 1);
        table.rows.emplace_back(name, std::strtod(value.c_str(), nullptr));
    }
    return table;
}

namespace {

struct Bounds {
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
};

Bounds series_bounds(const std::vector<PlotSeries>& series) {
    Bounds b;
    bool first = true;
    for (const PlotSeries& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                b = {x, x, y, y};
                first = false;
            } else {
                b.xmin = std::min(b.xmin, x);
                b.xmax = std::max(b.xmax, x);
                b.ymin = std::min(b.ymin, y);
                b.ymax = std::max(b.ymax, y);
            }
        }
    }
    if (b.xmax - b.xmin < 1e-12) b.xmax = b.xmin + 1.0;
    if (b.ymax - b.ymin < 1e-12) b.ymax = b.ymin + 1.0;
    return b;
}

}  // namespace

void write_svg_plot(const std::string& path, const std::vector<PlotSeries>& series,
                    const std::string& title, int width, int height) {
    const Bounds b = series_bounds(series);
    const double margin = 50.0;
    const double plot_w = width - 2 * margin;
    const double plot_h = height - 2 * margin;
    auto sx = [&](double x) { return margin + (x - b.xmin) / (b.xmax - b.xmin) * plot_w; };
    auto sy = [&](double y) { return height - margin - (y - b.ymin) / (b.ymax - b.ymin) * plot_h; };

    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-family='sans-serif' "
           "font-size='16'>"
        << title << "</text>\n";
    // Axes.
    out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
        << "' y2='" << height - margin << "' stroke='black'/>\n";
    out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
        << height - margin << "' stroke='black'/>\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g / %.3g", b.xmin, b.xmax);
    out << "<text x='" << width / 2 << "' y='" << height - 14
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>x: " << buf
        << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.3g / %.3g", b.ymin, b.ymax);
    out << "<text x='16' y='" << height / 2
        << "' text-anchor='middle' font-family='sans-serif' font-size='11' transform='rotate(-90 "
           "16 "
        << height / 2 << ")'>y: " << buf << "</text>\n";

    int legend_y = 40;
    for (const PlotSeries& s : series) {
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (const auto& [x, y] : s.points) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(x), sy(y));
            out << buf;
        }
        out << "'/>\n";
        out << "<text x='" << width - margin - 150 << "' y='" << legend_y
            << "' font-family='sans-serif' font-size='12' fill='" << s.color << "'>" << s.label
            << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

namespace {

std::vector<std::pair<double, double>> load_xy_csv(const std::string& path, int xcol, int ycol) {
    std::ifstream in(path);
    std::vector<std::pair<double, double>> pts;
    if (!in) return pts;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        std::vector<double> vals;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
        if (static_cast<int>(vals.size()) > std::max(xcol, ycol)) {
            pts.emplace_back(vals[static_cast<std::size_t>(xcol)],
                             vals[static_cast<std::size_t>(ycol)]);
        }
    }
    return pts;
}

}  // namespace

void aggregate_report(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::MissingArtifact, dir + " is not a directory");
    }
    std::vector<std::string> metric_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("metrics_", 0) == 0 && entry.path().extension() == ".csv") {
            metric_files.push_back(entry.path().string());
        }
    }
    std::sort(metric_files.begin(), metric_files.end());
    if (metric_files.empty()) {
        throw Error(ErrorCode::MissingArtifact, "no metrics_*.csv artifacts under " + dir);
    }

    std::vector<MetricTable> tables;
    for (const std::string& f : metric_files) tables.push_back(read_metrics_csv(f));

    // Stage CSVs carry the config hash in their third column; reuse the first.
    std::string config_hash = "unknown";
    {
        std::ifstream in(metric_files.front());
        std::string line;
        std::getline(in, line);  // header
        if (std::getline(in, line)) {
            const auto last_comma = line.rfind(',');
            if (last_comma != std::string::npos) config_hash = line.substr(last_comma + 1);
        }
    }

    const fs::path out_csv = fs::path(dir) / "report.csv";
    {
        std::ofstream out(out_csv);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_csv.string());
        out << "stage,metric,value,config_hash\n";
        char buf[256];
        for (const MetricTable& t : tables) {
            std::string stage = t.stage;
            if (stage.rfind("metrics_", 0) == 0) stage = stage.substr(8);
            for (const auto& [name, value] : t.rows) {
                std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%s\n", stage.c_str(), name.c_str(),
                              value, config_hash.c_str());
                out << buf;
            }
        }
    }

    const fs::path out_txt = fs::path(dir) / "report.txt";
    {
        std::ofstream out(out_txt);
        out << "lightloc run report (config " << config_hash << ")\n";
        out << std::string(58, '-') << "\n";
        char buf[256];
        for (const MetricTable& t : tables) {
            std::string stage = t.stage;
            if (stage.rfind("metrics_", 0) == 0) stage = stage.substr(8);
            for (const auto& [name, value] : t.rows) {
                std::snprintf(buf, sizeof(buf), "%-14s %-32s %.6g\n", stage.c_str(), name.c_str(),
                              value);
                out << buf;
            }
        }
    }

    // Optional plots.
    const fs::path plots = fs::path(dir) / "plots";
    const auto gt = load_xy_csv((fs::path(dir) / "trajectory_gt.csv").string(), 1, 2);
    const auto raw = load_xy_csv((fs::path(dir) / "trajectory_raw.csv").string(), 1, 2);
    const auto fused = load_xy_csv((fs::path(dir) / "trajectory_fused.csv").string(), 1, 2);
    if (!gt.empty() && !raw.empty() && !fused.empty()) {
        fs::create_directories(plots);
        write_svg_plot((plots / "trajectories.svg").string(),
                       {{"ground truth", "black", gt},
                        {"raw odometry", "crimson", raw},
                        {"fused", "royalblue", fused}},
                       "Trajectories");
    }
    const auto loss = load_xy_csv((fs::path(dir) / "loss_history.csv").string(), 0, 1);
    if (!loss.empty()) {
        fs::create_directories(plots);
        write_svg_plot((plots / "loss.svg").string(), {{"mean L1 loss", "royalblue", loss}},
                       "Training loss");
    }
}

}  // namespace lightloc
