#include <doctest.h>

#include <algorithm>
#include <map>

#include "lightloc/rng.hpp"
#include "lightloc/rsd.hpp"

using namespace lightloc;

TEST_CASE("stage epochs from the schedule formulas") {
    RsdConfig c;
    c.total_epochs = 25;
    c.start_ratio = 0.25;
    c.stop_ratio = 0.85;
    c.window = 3;
    const StageEpochs s = stage_epochs(c);
    CHECK(s.first_prune == 7);
    CHECK(s.second_prune == 13);
    CHECK(s.restore == 21);

    c.total_epochs = 100;
    const StageEpochs s100 = stage_epochs(c);
    CHECK(s100.first_prune == 25);
    CHECK(s100.second_prune == 55);
    CHECK(s100.restore == 85);
}

TEST_CASE("schedules that do not fit the window are rejected") {
    RsdConfig c;
    c.total_epochs = 10;
    c.start_ratio = 0.5;
    c.stop_ratio = 0.6;
    c.window = 3;
    CHECK_THROWS_AS(stage_epochs(c), Error);
    try {
        stage_epochs(c);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
    }
}

TEST_CASE("median handles odd, even, and singleton inputs") {
    CHECK(median({1, 2, 3}) == doctest::Approx(2.0));
    CHECK(median({1, 2, 3, 100}) == doctest::Approx(2.5));  // robust to the outlier
    CHECK(median({5}) == doctest::Approx(5.0));
}

TEST_CASE("window variance is the population variance") {
    CHECK(window_variance({2, 2, 2}, 3) == doctest::Approx(0.0));
    CHECK(window_variance({0, 2, 4}, 3) == doctest::Approx(8.0 / 3.0));
    CHECK(window_variance({1, 1, 1}, 3) < window_variance({0, 5, 10}, 3));
    CHECK_THROWS_AS(window_variance({1, 2}, 3), Error);
}

namespace {

RsdConfig reference_config() {
    RsdConfig c;
    c.total_epochs = 25;
    c.downsample_ratio = 0.25;
    c.start_ratio = 0.25;
    c.stop_ratio = 0.85;
    c.window = 3;
    return c;
}

std::vector<std::uint64_t> iota_ids(std::size_t n) {
    std::vector<std::uint64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    return ids;
}

// Deterministic synthetic per-sample loss stream: loss for (sample, epoch)
// decays with a per-sample rate so variances genuinely differ.
std::vector<double> fake_losses(std::uint64_t id, int epoch, Rng& rng) {
    const double rate = 0.02 + 0.2 * static_cast<double>(id % 97) / 97.0;
    const double base = 3.0 * std::exp(-rate * epoch) + 0.05 * static_cast<double>(id % 13);
    std::vector<double> v;
    for (int i = 0; i < 5; ++i) v.push_back(base + 0.01 * rng.normal());
    return v;
}

}  // namespace

TEST_CASE("prune keeps the highest-variance samples and floors the count") {
    const RsdConfig c = reference_config();
    RsdScheduler sched(c, iota_ids(1000));
    const StageEpochs s = sched.stages();

    Rng rng(61);
    std::map<std::uint64_t, std::vector<double>> medians;  // replay oracle state
    for (int epoch = 0; epoch <= s.first_prune + c.window; ++epoch) {
        const RsdAction action = sched.epoch_transition(epoch);
        if (epoch < s.first_prune + c.window) {
            CHECK(action == RsdAction::NoOp);
            for (std::uint64_t id : sched.active_set()) {
                const double m = sched.record_median_loss(id, fake_losses(id, epoch, rng));
                if (epoch >= s.first_prune) medians[id].push_back(m);
            }
        } else {
            CHECK(action == RsdAction::Prune);
            sched.prune();
        }
    }
    CHECK(sched.active_set().size() == 750);

    // The oracle sorts by variance descending with ascending-id ties and
    // keeps the front 750.
    std::vector<std::pair<double, std::uint64_t>> byvar;
    for (const auto& [id, window] : medians) {
        byvar.emplace_back(-window_variance(window, c.window), id);
    }
    std::sort(byvar.begin(), byvar.end());
    std::vector<std::uint64_t> expected;
    for (std::size_t i = 0; i < 750; ++i) expected.push_back(byvar[i].second);
    std::sort(expected.begin(), expected.end());
    CHECK(sched.active_set() == expected);
}

TEST_CASE("second prune floors 562.5 to 562") {
    const std::size_t keep1 = static_cast<std::size_t>(std::floor(0.75 * 1000));
    const std::size_t keep2 = static_cast<std::size_t>(std::floor(0.75 * keep1));
    CHECK(keep1 == 750);
    CHECK(keep2 == 562);
}

TEST_CASE("equal variances prune down to the lowest sample ids") {
    RsdConfig c = reference_config();
    RsdScheduler sched(c, iota_ids(100));
    const StageEpochs s = sched.stages();
    for (int epoch = 0; epoch <= s.first_prune + c.window; ++epoch) {
        const RsdAction a = sched.epoch_transition(epoch);
        if (a == RsdAction::Prune) {
            sched.prune();
        } else {
            for (std::uint64_t id : sched.active_set()) {
                sched.record_median_loss(id, {1.0, 2.0, 3.0});  // identical windows
            }
        }
    }
    REQUIRE(sched.active_set().size() == 75);
    for (std::size_t i = 0; i < 75; ++i) CHECK(sched.active_set()[i] == i);
}

TEST_CASE("epoch transitions fire at the schedule points") {
    const RsdConfig c = reference_config();  // stages (7, 13, 21), S = 3
    RsdScheduler sched(c, iota_ids(50));
    std::map<int, RsdAction> actions;
    for (int epoch = 0; epoch < c.total_epochs; ++epoch) {
        const RsdAction a = sched.epoch_transition(epoch);
        actions[epoch] = a;
        if (a == RsdAction::Prune) sched.prune();
        for (std::uint64_t id : sched.active_set()) {
            sched.record_median_loss(
                id, {1.0 + 0.1 * static_cast<double>(id % 7) * static_cast<double>(epoch % 5)});
        }
    }
    CHECK(actions[0] == RsdAction::NoOp);
    CHECK(actions[10] == RsdAction::Prune);
    CHECK(actions[16] == RsdAction::Prune);
    CHECK(actions[21] == RsdAction::RestoreFull);
    CHECK(actions[24] == RsdAction::NoOp);
    CHECK(sched.active_set().size() == 50);  // post-restore
}

TEST_CASE("record_median_loss rejects pruned samples") {
    RsdConfig c = reference_config();
    RsdScheduler sched(c, iota_ids(10));
    sched.epoch_transition(0);
    CHECK_THROWS_AS(sched.record_median_loss(999, {1.0}), Error);
    try {
        sched.record_median_loss(999, {1.0});
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownSample);
    }
}

TEST_CASE("prune outside the schedule epochs is rejected") {
    RsdConfig c = reference_config();
    RsdScheduler sched(c, iota_ids(10));
    sched.epoch_transition(3);
    CHECK_THROWS_AS(sched.prune(), Error);
    try {
        sched.prune();
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::WrongEpoch);
    }
}

// Full replay-oracle equivalence over every epoch, matching the scheduler
// against an independent reimplementation of the staged pruning.
TEST_CASE("scheduler matches the brute-force replay oracle") {
    const RsdConfig c = reference_config();
    const std::size_t n = 200;
    RsdScheduler sched(c, iota_ids(n));
    const StageEpochs s = sched.stages();

    // Oracle state.
    std::vector<std::uint64_t> oracle_active = iota_ids(n);
    std::map<std::uint64_t, std::vector<double>> oracle_windows;

    std::vector<std::vector<std::uint64_t>> sched_sets, oracle_sets;
    Rng stream_rng(67);

    // The same loss stream feeds both sides: losses depend only on (id,
    // epoch), so replay order cannot matter.
    std::map<std::pair<std::uint64_t, int>, std::vector<double>> losses;
    for (std::uint64_t id = 0; id < n; ++id) {
        for (int e = 0; e < c.total_epochs; ++e) {
            losses[{id, e}] = fake_losses(id, e, stream_rng);
        }
    }

    for (int epoch = 0; epoch < c.total_epochs; ++epoch) {
        // Scheduler side.
        const RsdAction action = sched.epoch_transition(epoch);
        if (action == RsdAction::Prune) sched.prune();
        for (std::uint64_t id : sched.active_set()) {
            sched.record_median_loss(id, losses[{id, epoch}]);
        }
        sched_sets.push_back(sched.active_set());

        // Oracle side.
        const bool prune_now =
            epoch == s.first_prune + c.window || epoch == s.second_prune + c.window;
        if (prune_now) {
            std::vector<std::pair<double, std::uint64_t>> ranked;
            for (std::uint64_t id : oracle_active) {
                ranked.emplace_back(-window_variance(oracle_windows[id], c.window), id);
            }
            std::sort(ranked.begin(), ranked.end());
            const std::size_t keep = static_cast<std::size_t>(
                std::floor((1.0 - c.downsample_ratio) * static_cast<double>(oracle_active.size())));
            oracle_active.clear();
            for (std::size_t i = 0; i < keep; ++i) oracle_active.push_back(ranked[i].second);
            std::sort(oracle_active.begin(), oracle_active.end());
            oracle_windows.clear();
        } else if (epoch == s.restore) {
            oracle_active = iota_ids(n);
            oracle_windows.clear();
        }
        const bool in_window =
            (epoch >= s.first_prune && epoch < s.first_prune + c.window) ||
            (epoch >= s.second_prune && epoch < s.second_prune + c.window);
        if (in_window) {
            for (std::uint64_t id : oracle_active) {
                oracle_windows[id].push_back(median(losses[{id, epoch}]));
            }
        }
        oracle_sets.push_back(oracle_active);
    }

    REQUIRE(sched_sets.size() == oracle_sets.size());
    for (std::size_t e = 0; e < sched_sets.size(); ++e) {
        CHECK(sched_sets[e] == oracle_sets[e]);
    }
}

TEST_CASE("active set sizes only grow at the restore epoch") {
    const RsdConfig c = reference_config();
    RsdScheduler sched(c, iota_ids(120));
    Rng rng(71);
    std::size_t prev = sched.active_set().size();
    for (int epoch = 0; epoch < c.total_epochs; ++epoch) {
        const RsdAction action = sched.epoch_transition(epoch);
        if (action == RsdAction::Prune) sched.prune();
        const std::size_t now = sched.active_set().size();
        if (action == RsdAction::RestoreFull) {
            CHECK(now == sched.full_set().size());
        } else {
            CHECK(now <= prev);
        }
        prev = now;
        for (std::uint64_t id : sched.active_set()) {
            sched.record_median_loss(id, fake_losses(id, epoch, rng));
        }
    }
}

TEST_CASE("surviving ids are independent of presentation order") {
    const RsdConfig c = reference_config();
    auto run = [&](bool reversed) {
        RsdScheduler sched(c, iota_ids(80));
        Rng noise(73);
        std::map<std::pair<std::uint64_t, int>, std::vector<double>> losses;
        for (std::uint64_t id = 0; id < 80; ++id) {
            for (int e = 0; e < c.total_epochs; ++e) losses[{id, e}] = fake_losses(id, e, noise);
        }
        for (int epoch = 0; epoch < c.total_epochs; ++epoch) {
            const RsdAction action = sched.epoch_transition(epoch);
            if (action == RsdAction::Prune) sched.prune();
            std::vector<std::uint64_t> order = sched.active_set();
            if (reversed) std::reverse(order.begin(), order.end());
            for (std::uint64_t id : order) sched.record_median_loss(id, losses[{id, epoch}]);
        }
        return sched.audit();
    };
    const auto a = run(false);
    const auto b = run(true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].active_size == b[i].active_size);
        CHECK(a[i].action == b[i].action);
    }
}

TEST_CASE("closed-form evaluation count matches a simulated run") {
    const RsdConfig c = reference_config();
    const long expected = expected_sample_evaluations(c, 1000);
    // (7,13,21) with S=3: 10 epochs of 1000, 6 of 750, 5 of 562, 4 of 1000.
    CHECK(expected == 10 * 1000 + 6 * 750 + 5 * 562 + 4 * 1000);

    RsdScheduler sched(c, iota_ids(1000));
    long simulated = 0;
    Rng rng(79);
    for (int epoch = 0; epoch < c.total_epochs; ++epoch) {
        const RsdAction action = sched.epoch_transition(epoch);
        if (action == RsdAction::Prune) sched.prune();
        for (std::uint64_t id : sched.active_set()) {
            sched.record_median_loss(id, fake_losses(id, epoch, rng));
        }
        simulated += static_cast<long>(sched.active_set().size());
    }
    CHECK(simulated == expected);
}
