#include "genfeat/checkpoint.hpp"

#include "genfeat/errors.hpp"
#include "genfeat/fileio.hpp"

namespace genfeat {

namespace {
constexpr char kMagic[4] = {'G', 'F', 'T', '1'};
}

void checkpoint_save(const std::map<std::string, Tensor>& tensors, const std::string& path) {
  ByteWriter w;
  w.magic(kMagic);
  for (const auto& [name, t] : tensors) {
    if (name.empty()) throw DataError("checkpoint: empty tensor name");
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (std::size_t i = 0; i < t.numel(); ++i) w.f32(static_cast<float>(t(i)));
  }
  write_file_atomic(path, w.str());
}

void checkpoint_save(const ParamStore& params, const std::string& path) {
  checkpoint_save(params.snapshot(), path);
}

std::map<std::string, Tensor> checkpoint_load(const std::string& path) {
  std::string buf = read_file(path);
  ByteReader r(buf, "checkpoint " + path);
  r.expect_magic(kMagic);
  std::map<std::string, Tensor> out;
  while (!r.at_end()) {
    std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) {
      throw DataError("checkpoint " + path + ": tensor \"" + name + "\" has rank " +
                      std::to_string(rank));
    }
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = r.u32();
      if (shape[i] == 0) {
        throw DataError("checkpoint " + path + ": tensor \"" + name + "\" has a zero extent");
      }
      numel *= shape[i];
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < numel; ++i) t(i) = static_cast<real>(r.f32());
    if (!out.emplace(name, std::move(t)).second) {
      throw DataError("checkpoint " + path + ": duplicate tensor \"" + name + "\"");
    }
  }
  return out;
}

}  // namespace genfeat
