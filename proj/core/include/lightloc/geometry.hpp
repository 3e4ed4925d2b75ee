#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "lightloc/error.hpp"

namespace lightloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Frame { Sensor, World };

// Rigid SE(3) transform taking sensor-frame points to world-frame points:
// p_world = R * p_sensor + t.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
};

struct PointCloud {
    std::vector<Vec3> points;
    Frame frame = Frame::Sensor;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

struct PoseError {
    double position_m = 0.0;     // ||t_pred - t_gt||
    double orientation_deg = 0.0;  // geodesic angle of R_pred^T R_gt
};

// Max elementwise residual of R^T R - I.
double orthonormality_residual(const Mat3& rotation);

bool is_valid_rotation(const Mat3& rotation, double tol = 1e-9);

// Nearest rotation matrix in the Frobenius sense (polar decomposition via
// SVD, determinant sign corrected).
Mat3 orthonormalize(const Mat3& m);

// Applies b then a. Re-orthonormalizes if accumulated drift exceeds 1e-9.
Pose compose(const Pose& a, const Pose& b);

Pose invert(const Pose& pose);

// Sensor -> World. Throws WrongFrame if the cloud is not in the sensor frame.
PointCloud transform(const Pose& pose, const PointCloud& cloud);

PoseError pose_error(const Pose& pred, const Pose& gt);

// Geodesic rotation angle in degrees; arccos argument clamped to [-1, 1].
double rotation_angle_deg(const Mat3& a, const Mat3& b);

// Rotation about +z by the given angle, as a pose with zero translation.
Pose yaw_pose(double yaw_rad);

Mat3 quat_to_matrix(double qw, double qx, double qy, double qz);
Eigen::Quaterniond matrix_to_quat(const Mat3& rotation);

// Pose text format, one pose per line:
//   timestamp tx ty tz qw qx qy qz
// Fields may be separated by whitespace and/or commas. '#' starts a comment.
struct TimedPose {
    double timestamp = 0.0;
    Pose pose;
};

std::vector<TimedPose> read_pose_file(const std::string& path);
void write_pose_file(const std::string& path, const std::vector<TimedPose>& poses);

// Point cloud binary format: little-endian float32, xyz interleaved, point
// count inferred from the file length.
PointCloud read_point_cloud(const std::string& path, Frame frame);
void write_point_cloud(const std::string& path, const PointCloud& cloud);

}  // namespace lightloc
