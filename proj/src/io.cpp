#include "cbpl/io.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace cbpl::io {

BinaryWriter::BinaryWriter(std::ostream& out, std::string name)
    : out_(out), name_(std::move(name)) {}

void BinaryWriter::raw(const void* src, std::size_t n) {
  out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
  if (!out_) throw std::runtime_error("write failed: " + name_);
}

void BinaryWriter::magic(const char* tag) { raw(tag, std::strlen(tag)); }

void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::vec(const Eigen::VectorXd& v) {
  raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void BinaryWriter::mat(const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void BinaryWriter::blob(const std::string& bytes) { raw(bytes.data(), bytes.size()); }

BinaryReader::BinaryReader(std::istream& in, std::string name)
    : in_(in), name_(std::move(name)) {}

void BinaryReader::fail(const std::string& what) const {
  throw std::runtime_error(name_ + ": " + what);
}

void BinaryReader::raw(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    fail("truncated file (wanted " + std::to_string(n) + " more bytes)");
}

void BinaryReader::magic(const char* tag) {
  const std::size_t n = std::strlen(tag);
  std::string got(n, '\0');
  raw(got.data(), n);
  if (got != tag) fail("bad magic, expected '" + std::string(tag) + "'");
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

Eigen::VectorXd BinaryReader::vec(Eigen::Index n) {
  Eigen::VectorXd v(n);
  raw(v.data(), sizeof(double) * static_cast<std::size_t>(n));
  return v;
}

Eigen::MatrixXd BinaryReader::mat(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
  return m;
}

std::string BinaryReader::blob(std::size_t n) {
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

}  // namespace cbpl::io
