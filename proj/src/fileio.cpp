#include "genfeat/fileio.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "genfeat/errors.hpp"

namespace genfeat {

static_assert(sizeof(float) == 4, "32-bit IEEE floats required");

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw DataError("failed reading " + path);
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) {
      std::remove(tmp.c_str());
      throw DataError("failed writing " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw DataError("failed moving " + tmp + " into place");
  }
}

void ByteReader::need(std::size_t n) {
  if (pos_ + n > buf_.size()) {
    throw DataError(what_ + ": truncated at byte " + std::to_string(pos_));
  }
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  }
  pos_ += 4;
  return v;
}

float ByteReader::f32() {
  std::uint32_t raw = u32();
  float f;
  std::memcpy(&f, &raw, 4);
  return f;
}

std::string ByteReader::bytes(std::size_t n) {
  need(n);
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_magic(const char magic[4]) {
  std::string got = bytes(4);
  if (std::memcmp(got.data(), magic, 4) != 0) {
    throw DataError(what_ + ": bad magic, expected \"" + std::string(magic, 4) + "\"");
  }
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) {
  std::uint32_t raw;
  std::memcpy(&raw, &v, 4);
  u32(raw);
}

void ByteWriter::bytes(const void* data, std::size_t n) {
  out_.append(static_cast<const char*>(data), n);
}

}  // namespace genfeat
