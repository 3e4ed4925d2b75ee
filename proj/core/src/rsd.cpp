#include "lightloc/rsd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace lightloc {

StageEpochs stage_epochs(const RsdConfig& config) {
    if (config.total_epochs < 1) throw Error(ErrorCode::InvalidConfig, "total_epochs must be >= 1");
    if (config.window < 2) throw Error(ErrorCode::InvalidConfig, "window must be >= 2");
    if (!(config.downsample_ratio > 0.0 && config.downsample_ratio < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "downsample_ratio must be in (0,1)");
    }
    if (!(config.start_ratio > 0.0 && config.start_ratio < config.stop_ratio &&
          config.stop_ratio < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "need 0 < start_ratio < stop_ratio < 1");
    }
    const double e = static_cast<double>(config.total_epochs);
    StageEpochs s;
    s.first_prune = static_cast<int>(std::ceil(e * config.start_ratio));
    s.second_prune = static_cast<int>(std::floor(e * (config.start_ratio + config.stop_ratio) / 2.0));
    s.restore = static_cast<int>(std::floor(e * config.stop_ratio));
    if (s.first_prune + config.window > s.second_prune ||
        s.second_prune + config.window > s.restore) {
        throw Error(ErrorCode::InvalidConfig,
                    "schedule (" + std::to_string(s.first_prune) + ", " +
                        std::to_string(s.second_prune) + ", " + std::to_string(s.restore) +
                        ") does not fit window S=" + std::to_string(config.window));
    }
    return s;
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::InvalidConfig, "median of empty sequence");
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, "non-finite loss value");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double window_variance(const std::vector<double>& values, int window) {
    if (static_cast<int>(values.size()) != window) {
        throw Error(ErrorCode::WindowNotFull, "have " + std::to_string(values.size()) +
                                                  " values, window is " + std::to_string(window));
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return var / static_cast<double>(values.size());
}

const char* to_string(RsdAction action) {
    switch (action) {
        case RsdAction::NoOp: return "noop";
        case RsdAction::Prune: return "prune";
        case RsdAction::RestoreFull: return "restore_full";
    }
    return "unknown";
}

RsdScheduler::RsdScheduler(const RsdConfig& config, std::vector<std::uint64_t> sample_ids)
    : config_(config), stages_(stage_epochs(config)), full_(std::move(sample_ids)) {
    if (full_.empty()) throw Error(ErrorCode::InvalidConfig, "empty sample set");
    std::sort(full_.begin(), full_.end());
    active_ = full_;
}

bool RsdScheduler::in_recording_window(int epoch) const {
    return (epoch >= stages_.first_prune && epoch < stages_.first_prune + config_.window) ||
           (epoch >= stages_.second_prune && epoch < stages_.second_prune + config_.window);
}

RsdAction RsdScheduler::epoch_transition(int epoch) {
    if (epoch < 0 || epoch >= config_.total_epochs) {
        throw Error(ErrorCode::InvalidConfig, "epoch out of range");
    }
    epoch_ = epoch;
    RsdAction action = RsdAction::NoOp;
    if (epoch == stages_.first_prune + config_.window ||
        epoch == stages_.second_prune + config_.window) {
        action = RsdAction::Prune;
    } else if (epoch == stages_.restore) {
        action = RsdAction::RestoreFull;
        active_ = full_;
        windows_.clear();
    }

    RsdAuditRow row;
    row.epoch = epoch;
    row.action = action;
    row.active_size = active_.size();  // size before a Prune applies
    audit_.push_back(row);
    return action;
}

bool RsdScheduler::is_active(std::uint64_t sample_id) const {
    return std::binary_search(active_.begin(), active_.end(), sample_id);
}

double RsdScheduler::record_median_loss(std::uint64_t sample_id,
                                        const std::vector<double>& per_point_losses) {
    if (!is_active(sample_id)) {
        throw Error(ErrorCode::UnknownSample, "sample " + std::to_string(sample_id) +
                                                  " is not in the active set");
    }
    const double m = median(per_point_losses);
    if (in_recording_window(epoch_)) {
        auto& window = windows_[sample_id];
        window.push_back(m);
        if (static_cast<int>(window.size()) > config_.window) {
            throw Error(ErrorCode::WrongEpoch,
                        "more than S medians recorded for sample " + std::to_string(sample_id));
        }
    }
    return m;
}

double RsdScheduler::variance(std::uint64_t sample_id) const {
    auto it = windows_.find(sample_id);
    if (it == windows_.end()) throw Error(ErrorCode::WindowNotFull, "no window for sample");
    return window_variance(it->second, config_.window);
}

void RsdScheduler::prune() {
    if (epoch_ != stages_.first_prune + config_.window &&
        epoch_ != stages_.second_prune + config_.window) {
        throw Error(ErrorCode::WrongEpoch,
                    "prune is only valid at epochs " +
                        std::to_string(stages_.first_prune + config_.window) + " and " +
                        std::to_string(stages_.second_prune + config_.window));
    }

    struct Entry {
        std::uint64_t id;
        double variance;
    };
    std::vector<Entry> entries;
    entries.reserve(active_.size());
    for (std::uint64_t id : active_) {
        auto it = windows_.find(id);
        if (it == windows_.end()) {
            throw Error(ErrorCode::WindowNotFull,
                        "sample " + std::to_string(id) + " has no recorded window");
        }
        entries.push_back({id, window_variance(it->second, config_.window)});
    }
    // Descending variance; ascending id on ties keeps the result independent
    // of presentation order.
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.variance != b.variance) return a.variance > b.variance;
        return a.id < b.id;
    });

    const std::size_t keep = static_cast<std::size_t>(
        std::floor((1.0 - config_.downsample_ratio) * static_cast<double>(active_.size())));
    std::vector<std::uint64_t> survivors;
    survivors.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) survivors.push_back(entries[i].id);
    std::sort(survivors.begin(), survivors.end());

    if (!audit_.empty()) {
        audit_.back().min_variance = entries.empty() ? 0.0 : entries.back().variance;
        audit_.back().max_variance = entries.empty() ? 0.0 : entries.front().variance;
        audit_.back().active_size = survivors.size();
    }

    active_ = std::move(survivors);
    windows_.clear();
}

long expected_sample_evaluations(const RsdConfig& config, std::size_t full_size) {
    const StageEpochs s = stage_epochs(config);
    const double keep = 1.0 - config.downsample_ratio;
    const std::size_t after_first =
        static_cast<std::size_t>(std::floor(keep * static_cast<double>(full_size)));
    const std::size_t after_second =
        static_cast<std::size_t>(std::floor(keep * static_cast<double>(after_first)));

    long total = 0;
    for (int e = 0; e < config.total_epochs; ++e) {
        std::size_t active = full_size;
        if (e >= s.restore) {
            active = full_size;
        } else if (e >= s.second_prune + config.window) {
            active = after_second;
        } else if (e >= s.first_prune + config.window) {
            active = after_first;
        }
        total += static_cast<long>(active);
    }
    return total;
}

void write_rsd_audit_csv(const std::string& path, const std::vector<RsdAuditRow>& rows,
                         const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "epoch,action,active_size,min_variance,max_variance,config_hash\n";
    char buf[256];
    for (const RsdAuditRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%zu,%.17g,%.17g,%s\n", r.epoch, to_string(r.action),
                      r.active_size, r.min_variance, r.max_variance, config_hash.c_str());
        out << buf;
    }
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace lightloc
