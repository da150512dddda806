#include "genfeat/feature_io.hpp"

#include <sstream>

#include "json.hpp"

#include "genfeat/errors.hpp"
#include "genfeat/fileio.hpp"

namespace genfeat {

namespace {
constexpr char kFeatMagic[4] = {'F', 'E', 'A', 'T'};
constexpr char kLayerMagic[4] = {'L', 'Y', 'R', '1'};

void save_ids(const std::vector<std::string>& ids, const std::string& path) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    nlohmann::json j;
    j["index"] = i;
    j["id"] = ids[i];
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<std::string> load_ids(const std::string& path, std::size_t expect) {
  std::string buf = read_file(path);
  std::istringstream in(buf);
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("index") || !j.contains("id")) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed id record");
    }
    if (j["index"].get<std::size_t>() != ids.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": id records out of order");
    }
    ids.push_back(j["id"].get<std::string>());
  }
  if (ids.size() != expect) {
    throw DataError(path + ": has " + std::to_string(ids.size()) + " ids, expected " +
                    std::to_string(expect));
  }
  return ids;
}

}  // namespace

void features_save(const FeatureSet& fs, const std::string& path) {
  if (fs.ids.size() != fs.features.size()) {
    throw DataError("feature set: " + std::to_string(fs.ids.size()) + " ids for " +
                    std::to_string(fs.features.size()) + " feature blocks");
  }
  ByteWriter w;
  w.magic(kFeatMagic);
  w.u32(static_cast<std::uint32_t>(fs.features.size()));
  w.u32(static_cast<std::uint32_t>(fs.rows));
  w.u32(static_cast<std::uint32_t>(fs.cols));
  for (const Tensor& t : fs.features) {
    require_shape(t, {fs.rows, fs.cols}, "feature block");
    for (std::size_t i = 0; i < t.numel(); ++i) w.f32(static_cast<float>(t(i)));
  }
  write_file_atomic(path, w.str());
  save_ids(fs.ids, path + ".ids.jsonl");
}

FeatureSet features_load(const std::string& path) {
  std::string buf = read_file(path);
  ByteReader r(buf, "feature file " + path);
  r.expect_magic(kFeatMagic);
  FeatureSet fs;
  std::uint32_t docs = r.u32();
  fs.rows = r.u32();
  fs.cols = r.u32();
  if (fs.rows == 0 || fs.cols == 0) throw DataError(path + ": zero feature dimensions");
  fs.features.reserve(docs);
  for (std::uint32_t d = 0; d < docs; ++d) {
    Tensor t({fs.rows, fs.cols});
    for (std::size_t i = 0; i < t.numel(); ++i) t(i) = static_cast<real>(r.f32());
    fs.features.push_back(std::move(t));
  }
  if (!r.at_end()) throw DataError(path + ": trailing bytes after feature data");
  fs.ids = load_ids(path + ".ids.jsonl", docs);
  return fs;
}

void layer_embeddings_save(const LayerEmbeddings& le, const std::string& path) {
  std::size_t expect = le.docs * le.tokens * le.layers * le.width;
  if (le.data.size() != expect) {
    throw DataError("layer embeddings: data size " + std::to_string(le.data.size()) +
                    " does not match header");
  }
  ByteWriter w;
  w.magic(kLayerMagic);
  w.u32(static_cast<std::uint32_t>(le.docs));
  w.u32(static_cast<std::uint32_t>(le.tokens));
  w.u32(static_cast<std::uint32_t>(le.layers));
  w.u32(static_cast<std::uint32_t>(le.width));
  for (real v : le.data) w.f32(static_cast<float>(v));
  write_file_atomic(path, w.str());
  if (!le.ids.empty()) {
    if (le.ids.size() != le.docs) throw DataError("layer embeddings: id count mismatch");
    save_ids(le.ids, path + ".ids.jsonl");
  }
}

LayerEmbeddings layer_embeddings_load(const std::string& path) {
  std::string buf = read_file(path);
  ByteReader r(buf, "layer embedding file " + path);
  r.expect_magic(kLayerMagic);
  LayerEmbeddings le;
  le.docs = r.u32();
  le.tokens = r.u32();
  le.layers = r.u32();
  le.width = r.u32();
  if (le.tokens == 0 || le.layers == 0 || le.width == 0) {
    throw DataError(path + ": zero dimensions in header");
  }
  std::size_t n = le.docs * le.tokens * le.layers * le.width;
  le.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) le.data[i] = static_cast<real>(r.f32());
  if (!r.at_end()) throw DataError(path + ": trailing bytes after embedding data");
  return le;
}

}  // namespace genfeat
