#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mrieval {

/// N feature vectors (rows) of dimension D produced by one encoder.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  /// Throws Error for an empty matrix or non-finite entries. `ids`, when
  /// given, must have one entry per row.
  EmbeddingSet(Eigen::MatrixXd vectors, std::string source_tag, std::vector<std::string> ids = {});

  const Eigen::MatrixXd& vectors() const { return vectors_; }
  const std::string& source_tag() const { return tag_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t rows() const { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors_.cols()); }

 private:
  Eigen::MatrixXd vectors_;
  std::string tag_;
  std::vector<std::string> ids_;
};

/// CSV: header `id,f0,f1,...`, one row per MRI.
EmbeddingSet parse_embeddings_csv(std::string_view text, std::string source_tag);
std::string embeddings_to_csv(const EmbeddingSet& e);

/// Binary: "VEMB", u32 version (1), u32 N, u32 D, N*D little-endian float32.
EmbeddingSet parse_embeddings_binary(std::span<const std::uint8_t> bytes, std::string source_tag);
std::vector<std::uint8_t> embeddings_to_binary(const EmbeddingSet& e);

/// Picks the format by content (VEMB magic, else CSV).
EmbeddingSet load_embeddings(const std::filesystem::path& path, std::string source_tag);

}  // namespace mrieval
