#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "rem/error.hpp"

namespace rem {

// Little-endian writer for checkpoint files. Matrices are written row-major
// as float32.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    require(static_cast<bool>(out_), ErrorKind::Io, "cannot write " + path.string());
  }

  void magic(const std::string& m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 4);
  }

  void f32(double value) {
    const float f = static_cast<float>(value);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }

  template <typename Derived>
  void block(const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f32(static_cast<double>(m(i, j)));
  }

  void finish() {
    out_.flush();
    require(static_cast<bool>(out_), ErrorKind::Io, "write failed: " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    require(static_cast<bool>(in_), ErrorKind::MissingFile, "missing file: " + path.string());
  }

  void expect_magic(const std::string& m) {
    std::string got(m.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    require(static_cast<bool>(in_) && got == m, ErrorKind::Parse,
            path_.string() + ": bad magic (expected " + m + ")");
  }

  std::uint32_t u32() {
    unsigned char b[4];
    in_.read(reinterpret_cast<char*>(b), 4);
    require(static_cast<bool>(in_), ErrorKind::Parse, path_.string() + ": truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  double f32() {
    const std::uint32_t bits = u32();
    float f = 0.0f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

  Eigen::MatrixXd block(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f32();
    return m;
  }

  Eigen::VectorXd vec(Eigen::Index n) { return block(n, 1); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace rem
