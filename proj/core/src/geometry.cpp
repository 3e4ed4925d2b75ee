#include "lightloc/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lightloc {

double orthonormality_residual(const Mat3& rotation) {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

bool is_valid_rotation(const Mat3& rotation, double tol) {
    return rotation.allFinite() && orthonormality_residual(rotation) <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat3 orthonormalize(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    if (orthonormality_residual(out.rotation) > 1e-9) {
        out.rotation = orthonormalize(out.rotation);
    }
    return out;
}

Pose invert(const Pose& pose) {
    Pose out;
    out.rotation = pose.rotation.transpose();
    out.translation = -(out.rotation * pose.translation);
    return out;
}

PointCloud transform(const Pose& pose, const PointCloud& cloud) {
    if (cloud.frame != Frame::Sensor) {
        throw Error(ErrorCode::WrongFrame, "transform expects a sensor-frame cloud");
    }
    PointCloud out;
    out.frame = Frame::World;
    out.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) {
        out.points.push_back(pose.rotation * p + pose.translation);
    }
    return out;
}

double rotation_angle_deg(const Mat3& a, const Mat3& b) {
    const Mat3 rel = a.transpose() * b;
    double c = (rel.trace() - 1.0) / 2.0;
    c = std::min(1.0, std::max(-1.0, c));
    return std::acos(c) * 180.0 / M_PI;
}

PoseError pose_error(const Pose& pred, const Pose& gt) {
    PoseError e;
    e.position_m = (pred.translation - gt.translation).norm();
    e.orientation_deg = rotation_angle_deg(pred.rotation, gt.rotation);
    return e;
}

Pose yaw_pose(double yaw_rad) {
    Pose p;
    p.rotation = Eigen::AngleAxisd(yaw_rad, Vec3::UnitZ()).toRotationMatrix();
    return p;
}

Mat3 quat_to_matrix(double qw, double qx, double qy, double qz) {
    Eigen::Quaterniond q(qw, qx, qy, qz);
    q.normalize();
    return q.toRotationMatrix();
}

Eigen::Quaterniond matrix_to_quat(const Mat3& rotation) {
    Eigen::Quaterniond q(rotation);
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return q;
}

std::vector<TimedPose> read_pose_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open pose file " + path);
    std::vector<TimedPose> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        for (char& c : line) {
            if (c == ',') c = ' ';
        }
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first) || first[0] == '#') continue;
        double v[8];
        char* end = nullptr;
        v[0] = std::strtod(first.c_str(), &end);
        if (end == first.c_str()) {
            throw Error(ErrorCode::IoError,
                        path + ":" + std::to_string(lineno) + ": bad pose line");
        }
        for (int i = 1; i < 8; ++i) {
            if (!(ss >> v[i])) {
                throw Error(ErrorCode::IoError,
                            path + ":" + std::to_string(lineno) + ": expected 8 fields");
            }
        }
        TimedPose tp;
        tp.timestamp = v[0];
        tp.pose.translation = Vec3(v[1], v[2], v[3]);
        tp.pose.rotation = quat_to_matrix(v[4], v[5], v[6], v[7]);
        out.push_back(tp);
    }
    return out;
}

void write_pose_file(const std::string& path, const std::vector<TimedPose>& poses) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write pose file " + path);
    char buf[256];
    for (const TimedPose& tp : poses) {
        const Eigen::Quaterniond q = matrix_to_quat(tp.pose.rotation);
        std::snprintf(buf, sizeof(buf),
                      "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", tp.timestamp,
                      tp.pose.translation.x(), tp.pose.translation.y(),
                      tp.pose.translation.z(), q.w(), q.x(), q.y(), q.z());
        out << buf;
    }
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

namespace {

// The on-disk float format is little-endian regardless of host order.
void put_le_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    buf.push_back(static_cast<char>(bits & 0xff));
    buf.push_back(static_cast<char>((bits >> 8) & 0xff));
    buf.push_back(static_cast<char>((bits >> 16) & 0xff));
    buf.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_le_f32(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

PointCloud read_point_cloud(const std::string& path, Frame frame) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open point cloud " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 12 != 0) {
        throw Error(ErrorCode::IoError, path + ": size is not a multiple of 12 bytes");
    }
    PointCloud cloud;
    cloud.frame = frame;
    const std::size_t n = bytes.size() / 12;
    cloud.points.reserve(n);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < n; ++i, p += 12) {
        cloud.points.emplace_back(get_le_f32(p), get_le_f32(p + 4), get_le_f32(p + 8));
    }
    return cloud;
}

void write_point_cloud(const std::string& path, const PointCloud& cloud) {
    std::string buf;
    buf.reserve(cloud.points.size() * 12);
    for (const Vec3& p : cloud.points) {
        put_le_f32(buf, static_cast<float>(p.x()));
        put_le_f32(buf, static_cast<float>(p.y()));
        put_le_f32(buf, static_cast<float>(p.z()));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write point cloud " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace lightloc
