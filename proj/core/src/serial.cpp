#include "lightloc/serial.hpp"

#include <cstring>
#include <filesystem>

namespace lightloc {

BinaryWriter::BinaryWriter(const std::string& path)
    : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
}

void BinaryWriter::magic(const char tag[4]) { out_.write(tag, 4); }

void BinaryWriter::u16(std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out_.write(b, 2);
}

void BinaryWriter::u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 8);
}

void BinaryWriter::f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
}

void BinaryWriter::matrix(const Eigen::MatrixXd& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
}

void BinaryWriter::vector(const Eigen::VectorXd& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
}

void BinaryWriter::close() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::IoError, "short write to " + path_);
    out_.close();
}

BinaryReader::BinaryReader(const std::string& path) : path_(path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::MissingArtifact, path + " does not exist");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    data_.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void BinaryReader::need(std::size_t bytes) {
    if (pos_ + bytes > data_.size()) {
        throw Error(ErrorCode::IoError, path_ + ": truncated (need " + std::to_string(bytes) +
                                            " bytes at offset " + std::to_string(pos_) + ")");
    }
}

void BinaryReader::expect_magic(const char tag[4]) {
    need(4);
    if (std::memcmp(data_.data() + pos_, tag, 4) != 0) {
        throw Error(ErrorCode::VersionMismatch,
                    path_ + ": wrong magic, expected " + std::string(tag, 4));
    }
    pos_ += 4;
}

void BinaryReader::expect_version(std::uint16_t version) {
    const std::uint16_t got = u16();
    if (got != version) {
        throw Error(ErrorCode::VersionMismatch, path_ + ": format version " + std::to_string(got) +
                                                    ", expected " + std::to_string(version));
    }
}

std::uint16_t BinaryReader::u16() {
    need(2);
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t BinaryReader::u32() {
    need(4);
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    pos_ += 4;
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t BinaryReader::u64() {
    need(8);
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    pos_ += 8;
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

double BinaryReader::f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

Eigen::MatrixXd BinaryReader::matrix() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = f64();
    }
    return m;
}

Eigen::VectorXd BinaryReader::vector() {
    const std::uint32_t n = u32();
    Eigen::VectorXd v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = f64();
    return v;
}

}  // namespace lightloc
