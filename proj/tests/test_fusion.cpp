#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "lightloc/fusion.hpp"
#include "lightloc/rng.hpp"

using namespace lightloc;

TEST_CASE("predict with zero motion and zero noise leaves the state alone") {
    KalmanState s;
    s.mean = Vec3(1, 2, 3);
    s.covariance = Mat3::Identity() * 0.5;
    const KalmanState out = kf_predict(s, OdometryStep{});
    CHECK((out.mean - s.mean).norm() == doctest::Approx(0.0));
    CHECK((out.covariance - s.covariance).norm() == doctest::Approx(0.0));
}

TEST_CASE("predict adds the delta and the process noise") {
    KalmanState s;
    s.covariance = Mat3::Identity();
    OdometryStep step;
    step.delta = Vec3(1, 0, 0);
    step.process_noise = Mat3::Identity();
    const KalmanState out = kf_predict(s, step);
    CHECK((out.mean - Vec3(1, 0, 0)).norm() == doctest::Approx(0.0));
    CHECK((out.covariance - 2.0 * Mat3::Identity()).norm() == doctest::Approx(0.0));
}

TEST_CASE("update with equal trust averages prior and measurement") {
    KalmanState prior;
    prior.mean = Vec3(0, 0, 0);
    prior.covariance = Mat3::Identity();  // P = I, c = 0 gives V = I
    Observation obs;
    obs.position = Vec3(2, 4, -2);
    obs.confidence = 0.0;
    const KalmanState post = kf_update(prior, obs);
    CHECK((post.mean - Vec3(1, 2, -1)).norm() < 1e-12);
    CHECK((post.covariance - 0.5 * Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("full confidence snaps the mean to the measurement") {
    KalmanState prior;
    prior.mean = Vec3(5, 5, 5);
    prior.covariance = Mat3::Identity() * 3.0;
    Observation obs;
    obs.position = Vec3(1, 2, 3);
    obs.confidence = 1.0;  // V = 0, K = I
    const KalmanState post = kf_update(prior, obs);
    CHECK((post.mean - obs.position).norm() < 1e-12);
    CHECK(post.covariance.norm() < 1e-12);

    // Repeating the same perfect observation is idempotent in the mean.
    OdometryStep still;
    still.process_noise = Mat3::Identity() * 0.1;
    const KalmanState again = kf_update(kf_predict(post, still), obs);
    CHECK((again.mean - obs.position).norm() < 1e-12);
}

TEST_CASE("kalman gain for c=0.75 and unit prior is 0.8") {
    KalmanState prior;
    prior.covariance = Mat3::Identity();
    Observation obs;
    obs.position = Vec3(1, 0, 0);
    obs.confidence = 0.75;  // V = 0.25 I, K = 1/(1.25) I = 0.8 I
    const KalmanState post = kf_update(prior, obs);
    CHECK(post.mean.x() == doctest::Approx(0.8));
    CHECK((post.covariance - 0.2 * Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("scalar gain stays inside [0, 1] and is monotone in confidence") {
    for (double p : {0.01, 0.5, 2.0, 10.0}) {
        double prev_gain = -1.0;
        for (double c : {0.0, 0.25, 0.5, 0.75, 0.999}) {
            const double gain = p / ((1.0 - c) + p);
            CHECK(gain >= 0.0);
            CHECK(gain <= 1.0);
            CHECK(gain > prev_gain);
            prev_gain = gain;
        }
    }
}

TEST_CASE("posterior covariance never exceeds the prior") {
    Rng rng(163);
    for (int trial = 0; trial < 25; ++trial) {
        KalmanState prior;
        prior.mean = Vec3(rng.normal(), rng.normal(), rng.normal());
        Mat3 a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
        prior.covariance = a * a.transpose() + 0.01 * Mat3::Identity();
        Observation obs;
        obs.position = Vec3(rng.normal(), rng.normal(), rng.normal());
        obs.confidence = rng.uniform(0.0, 0.99);
        const KalmanState post = kf_update(prior, obs);
        const Mat3 diff = prior.covariance - post.covariance;
        const Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (diff + diff.transpose()));
        CHECK(eig.eigenvalues().minCoeff() > -1e-9);
        // Posterior stays symmetric PSD as well.
        const Eigen::SelfAdjointEigenSolver<Mat3> peig(post.covariance);
        CHECK(peig.eigenvalues().minCoeff() > -1e-9);
    }
}

TEST_CASE("degenerate innovation is reported") {
    KalmanState prior;  // zero covariance
    Observation obs;
    obs.confidence = 1.0;  // V = 0 too
    CHECK_THROWS_AS(kf_update(prior, obs), Error);
    try {
        kf_update(prior, obs);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularInnovation);
    }
}

namespace {

std::vector<Vec3> straight_line(double length, double step) {
    std::vector<Vec3> pts;
    for (double x = 0.0; x <= length + 1e-9; x += step) pts.emplace_back(x, 0.0, 0.0);
    return pts;
}

}  // namespace

TEST_CASE("odometry with no bias and no noise integrates to the truth") {
    const auto gt = straight_line(100.0, 1.0);
    DriftSpec drift;
    const auto steps = simulate_odometry(gt, drift, 7);
    Vec3 pos = gt.front();
    for (const auto& s : steps) pos += s.delta;
    CHECK((pos - gt.back()).norm() < 1e-9);
}

TEST_CASE("bias of 0.05 per meter drifts about 50 m over a kilometer") {
    const auto gt = straight_line(1000.0, 1.0);
    DriftSpec drift;
    drift.bias_per_meter = Vec3(0.0, 0.05, 0.0);
    const auto steps = simulate_odometry(gt, drift, 7);
    Vec3 pos = gt.front();
    for (const auto& s : steps) pos += s.delta;
    CHECK((pos - gt.back()).norm() == doctest::Approx(50.0).epsilon(0.01));
}

TEST_CASE("odometry is reproducible for a fixed seed") {
    const auto gt = straight_line(50.0, 0.5);
    DriftSpec drift;
    drift.bias_per_meter = Vec3(0.01, 0.0, 0.0);
    drift.noise_sigma = 0.05;
    const auto a = simulate_odometry(gt, drift, 99);
    const auto b = simulate_odometry(gt, drift, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].delta == b[i].delta);
}

TEST_CASE("fusion with perfect observations every step has zero error") {
    const auto gt = straight_line(100.0, 1.0);
    DriftSpec drift;
    drift.bias_per_meter = Vec3(0.0, 0.1, 0.0);
    const auto steps = simulate_odometry(gt, drift, 3);
    std::vector<std::optional<Observation>> obs(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        obs[i] = Observation{gt[i + 1], 1.0};
    }
    const FusionReport report = run_fusion(gt, steps, obs);
    CHECK(report.fused_mean_error < 1e-9);
    CHECK(report.raw_mean_error > 1.0);
}

TEST_CASE("fusion with no observations reduces to raw odometry") {
    const auto gt = straight_line(100.0, 1.0);
    DriftSpec drift;
    drift.bias_per_meter = Vec3(0.0, 0.05, 0.0);
    const auto steps = simulate_odometry(gt, drift, 3);
    std::vector<std::optional<Observation>> obs(steps.size());  // all empty
    const FusionReport report = run_fusion(gt, steps, obs);
    CHECK(report.fused_mean_error == doctest::Approx(report.raw_mean_error));
    for (std::size_t i = 0; i < report.raw.size(); ++i) {
        CHECK((report.raw[i] - report.fused[i]).norm() < 1e-12);
    }
}

TEST_CASE("noisy cluster-center observations still collapse the drift") {
    const auto gt = straight_line(500.0, 1.0);
    DriftSpec drift;
    drift.bias_per_meter = Vec3(0.0, 0.1, 0.0);  // 50 m terminal drift
    const auto steps = simulate_odometry(gt, drift, 11);
    // Observations snap to a 10 m grid along x, mimicking leaf centers.
    std::vector<std::optional<Observation>> obs(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const Vec3 truth = gt[i + 1];
        const Vec3 center(std::round(truth.x() / 10.0) * 10.0, 0.0, 0.0);
        const double dist = (truth - center).norm();
        obs[i] = Observation{center, std::max(0.1, 1.0 - dist / 5.0)};
    }
    const FusionReport report = run_fusion(gt, steps, obs);
    CHECK(report.raw_mean_error > 10.0);
    CHECK(report.fused_mean_error < 0.2 * report.raw_mean_error);
}

TEST_CASE("mismatched sequence lengths are rejected") {
    const auto gt = straight_line(10.0, 1.0);
    std::vector<OdometryStep> steps(3);
    CHECK_THROWS_AS(run_fusion(gt, steps, {}), Error);
}
