#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <fstream>
#include <string>

#include "lightloc/error.hpp"

namespace lightloc {

// Little-endian binary stream helpers for the versioned artifact formats
// (LLCM cluster models, LLCH classifier heads, LLRH regression heads).

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path);

    void magic(const char tag[4]);
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void matrix(const Eigen::MatrixXd& m);  // rows u32, cols u32, f64 row-major
    void vector(const Eigen::VectorXd& v);

    void close();

private:
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    // Throws MissingArtifact if the file does not exist, IoError if truncated.
    explicit BinaryReader(const std::string& path);

    // Throws VersionMismatch when the tag differs.
    void expect_magic(const char tag[4]);
    // Throws VersionMismatch when the stored version differs.
    void expect_version(std::uint16_t version);

    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    Eigen::MatrixXd matrix();
    Eigen::VectorXd vector();

private:
    void need(std::size_t bytes);

    std::string path_;
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace lightloc
