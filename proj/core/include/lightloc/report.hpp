#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lightloc/geometry.hpp"

namespace lightloc {

// FNV-1a of the file bytes, as 16 hex digits.
std::string file_checksum(const std::string& path);

struct ManifestEntry {
    std::string path;  // relative to the manifest directory
    std::string checksum;
};

void write_manifest(const std::string& path, const std::string& config_hash, std::uint64_t seed,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path, std::string* config_hash);

// Per-stage metric rows, written as `metric,value,config_hash` CSV.
struct MetricTable {
    std::string stage;
    std::vector<std::pair<std::string, double>> rows;
};

void write_metrics_csv(const std::string& path, const MetricTable& table,
                       const std::string& config_hash);
MetricTable read_metrics_csv(const std::string& path);

// Minimal SVG polyline plot, one curve per series.
struct PlotSeries {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

void write_svg_plot(const std::string& path, const std::vector<PlotSeries>& series,
                    const std::string& title, int width = 720, int height = 540);

// Aggregates every metrics_*.csv under `dir` into report.csv / report.txt and
// renders trajectory/loss plots when their CSVs are present. Throws
// MissingArtifact when the directory holds nothing to aggregate.
void aggregate_report(const std::string& dir);

}  // namespace lightloc
