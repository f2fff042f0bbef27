#pragma once

#include "qasir/embedding_store.hpp"
#include "qasir/manifest.hpp"

#include <cstdint>

namespace qasir {

struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t num_videos = 200;
    std::size_t k_min = 8;  // super images per video drawn uniformly from [k_min, k_max]
    std::size_t k_max = 8;
    Eigen::Index d = 64;
    double noise_sigma = 0.1;       // expected norm of the noise added to planted rows
    double moment_fraction = 0.125; // share of the target video's rows planted per query
    std::size_t queries_per_video = 1;
};

struct SynthCorpus {
    EmbeddingStore store;
    Manifest manifest;  // one second per super image; spans mark the planted rows
};

// Every row and query is a unit vector. Query q of video v gets a block of
// ceil(moment_fraction * K) consecutive rows set to normalize(q + noise), noise ~ N(0, sigma^2/d I).
// Blocks of different queries on one video never overlap. Fully determined by the seed.
SynthCorpus generate(const SynthConfig& config);

} // namespace qasir
