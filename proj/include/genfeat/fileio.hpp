#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace genfeat {

// Whole-file helpers. Writes go through a temp file in the same directory
// followed by a rename, so readers never observe partial artifacts.
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& bytes);

// Little-endian binary cursor over an in-memory buffer.
class ByteReader {
public:
  ByteReader(const std::string& buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}
  std::uint32_t u32();
  float f32();
  std::string bytes(std::size_t n);
  void expect_magic(const char magic[4]);
  bool at_end() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

private:
  const std::string& buf_;
  std::string what_;
  std::size_t pos_ = 0;
  void need(std::size_t n);
};

class ByteWriter {
public:
  void u32(std::uint32_t v);
  void f32(float v);
  void bytes(const void* data, std::size_t n);
  void magic(const char m[4]) { bytes(m, 4); }
  const std::string& str() const { return out_; }

private:
  std::string out_;
};

}  // namespace genfeat
