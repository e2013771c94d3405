#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace cbpl::io {

// Little-endian binary stream helpers shared by the dataset and model
// containers. All floating point payloads are raw float64.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out, std::string name = "<stream>");

  void magic(const char* tag);  // writes strlen(tag) bytes
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void vec(const Eigen::VectorXd& v);  // raw doubles, no length prefix
  void mat(const Eigen::MatrixXd& m);  // row-major raw doubles
  void blob(const std::string& bytes);

 private:
  void raw(const void* src, std::size_t n);
  std::ostream& out_;
  std::string name_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string name = "<stream>");

  void magic(const char* tag);  // reads strlen(tag) bytes and verifies them
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  Eigen::VectorXd vec(Eigen::Index n);
  Eigen::MatrixXd mat(Eigen::Index rows, Eigen::Index cols);
  std::string blob(std::size_t n);
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void raw(void* dst, std::size_t n);
  std::istream& in_;
  std::string name_;
};

}  // namespace cbpl::io
