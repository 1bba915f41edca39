#include "curator/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

static_assert(std::endian::native == std::endian::little,
              "store layout is little-endian; big-endian hosts are unsupported");

namespace curator {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* field) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw std::runtime_error(std::string("truncated store file reading ") + field +
                             " at offset " + std::to_string(in.tellg()));
  }
  return value;
}

}  // namespace

std::string EmbeddingStore::validate() const {
  if (static_cast<std::size_t>(vectors.rows()) != ids.size()) return "row count != id count";
  if (count() > 0 && static_cast<std::uint32_t>(vectors.cols()) != dim) return "dim mismatch";
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) return "duplicate id: " + id;
  }
  if (!vectors.allFinite()) return "non-finite vector entry";
  return {};
}

void save_store(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open store for writing: " + path);

  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, store.dim);
  write_pod(out, static_cast<std::uint64_t>(store.count()));
  for (const auto& id : store.ids) {
    write_pod(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  if (store.count() > 0) {
    out.write(reinterpret_cast<const char*>(store.vectors.data()),
              static_cast<std::streamsize>(sizeof(float) * store.count() * store.dim));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open store: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad magic in store file (field: magic, offset 0): " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw std::runtime_error("unsupported store version (field: version, offset 4): " +
                             std::to_string(version));
  }

  EmbeddingStore store;
  store.dim = read_pod<std::uint32_t>(in, "dim");
  const auto count = read_pod<std::uint64_t>(in, "count");

  store.ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint32_t>(in, "id length");
    std::string id(len, '\0');
    in.read(id.data(), len);
    if (!in) throw std::runtime_error("truncated store file reading id bytes");
    store.ids.push_back(std::move(id));
  }

  store.vectors.resize(static_cast<Eigen::Index>(count), store.dim);
  if (count > 0) {
    in.read(reinterpret_cast<char*>(store.vectors.data()),
            static_cast<std::streamsize>(sizeof(float) * count * store.dim));
    if (!in) throw std::runtime_error("truncated store file reading vectors");
  }
  if (auto err = store.validate(); !err.empty()) {
    throw std::runtime_error("invalid store: " + err);
  }
  return store;
}

}  // namespace curator
