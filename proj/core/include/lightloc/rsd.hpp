#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "lightloc/error.hpp"

namespace lightloc {

struct RsdConfig {
    int total_epochs = 25;
    double downsample_ratio = 0.25;  // r_d
    double start_ratio = 0.25;       // r_st
    double stop_ratio = 0.85;        // r_sp
    int window = 3;                  // S
};

struct StageEpochs {
    int first_prune = 0;   // E1 = ceil(E * r_st)
    int second_prune = 0;  // E2 = floor(E * (r_st + r_sp) / 2)
    int restore = 0;       // Es = floor(E * r_sp)
};

// Computes (E1, E2, Es) and validates E1 + S <= E2 and E2 + S <= Es.
// Throws InvalidConfig when the schedule does not fit.
StageEpochs stage_epochs(const RsdConfig& config);

// Median of the values; even length averages the two middle elements.
double median(std::vector<double> values);

// Population variance of exactly `window` values. Throws WindowNotFull.
double window_variance(const std::vector<double>& values, int window);

enum class RsdAction { NoOp, Prune, RestoreFull };

const char* to_string(RsdAction action);

struct RsdAuditRow {
    int epoch = 0;
    RsdAction action = RsdAction::NoOp;
    std::size_t active_size = 0;
    double min_variance = 0.0;
    double max_variance = 0.0;
};

// Staged sample scheduler. Samples whose median per-point loss shows low
// variance over a sliding window of epochs are considered learned and pruned
// in two rounds; the full set is restored for the final epochs. Call
// epoch_transition at the start of every epoch, apply the action it returns,
// and feed record_median_loss once per active sample during the epoch.
class RsdScheduler {
public:
    RsdScheduler(const RsdConfig& config, std::vector<std::uint64_t> sample_ids);

    // Declares the current epoch and reports the action due at its start:
    // Prune exactly at E1+S and E2+S, RestoreFull exactly at Es.
    RsdAction epoch_transition(int epoch);

    // Computes the median of the per-point losses, recording it into the
    // sample's window only while the current epoch lies in [Ej, Ej+S).
    // Throws UnknownSample for ids outside the active set.
    double record_median_loss(std::uint64_t sample_id, const std::vector<double>& per_point_losses);

    // Sorts the active set by window variance (descending, ties by ascending
    // id), keeps the front floor((1-r_d)*|active|), clears the windows.
    // Throws WrongEpoch unless the current epoch is E1+S or E2+S.
    void prune();

    const std::vector<std::uint64_t>& active_set() const { return active_; }
    const std::vector<std::uint64_t>& full_set() const { return full_; }
    const StageEpochs& stages() const { return stages_; }
    const RsdConfig& config() const { return config_; }
    int current_epoch() const { return epoch_; }
    bool is_active(std::uint64_t sample_id) const;

    // Variance of a sample's current window. Throws WindowNotFull.
    double variance(std::uint64_t sample_id) const;

    const std::vector<RsdAuditRow>& audit() const { return audit_; }

private:
    bool in_recording_window(int epoch) const;

    RsdConfig config_;
    StageEpochs stages_;
    int epoch_ = -1;
    std::vector<std::uint64_t> full_;
    std::vector<std::uint64_t> active_;
    std::unordered_map<std::uint64_t, std::vector<double>> windows_;
    std::vector<RsdAuditRow> audit_;
};

// Total number of per-sample evaluations the schedule performs over the whole
// run (active-set size summed over epochs), in closed form.
long expected_sample_evaluations(const RsdConfig& config, std::size_t full_size);

void write_rsd_audit_csv(const std::string& path, const std::vector<RsdAuditRow>& rows,
                         const std::string& config_hash);

}  // namespace lightloc
