#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Core>

#include "mrieval/embedding.hpp"
#include "mrieval/volume.hpp"

namespace mrieval {

/// Deterministic stand-in encoder for tests and demos: 4x4x4 mean pooling,
/// flatten, then a seeded random +-1/sqrt(dim) projection. Linear in the
/// voxel values.
Eigen::VectorXd toy_embed(const Volume& v, std::size_t dim, std::uint64_t seed);

EmbeddingSet toy_embed_set(std::span<const Volume> volumes, std::size_t dim, std::uint64_t seed,
                           std::string source_tag = "TOY", unsigned threads = 1);

}  // namespace mrieval
