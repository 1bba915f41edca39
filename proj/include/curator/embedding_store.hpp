#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace curator {

using MatrixRowMajorF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense vectors with stable row ids. Immutable after construction; share
// freely across threads.
struct EmbeddingStore {
  std::uint32_t dim = 0;
  std::vector<std::string> ids;
  MatrixRowMajorF vectors;  // ids.size() x dim

  std::size_t count() const { return ids.size(); }

  // Empty string when valid.
  std::string validate() const;
};

// Binary layout: magic "EMBS", u32 version=1, u32 dim, u64 count,
// per id [u32 byte length, UTF-8 bytes], then row-major little-endian f32.
void save_store(const EmbeddingStore& store, const std::string& path);
EmbeddingStore load_store(const std::string& path);

}  // namespace curator
