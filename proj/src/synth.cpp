#include "qasir/synth.hpp"

#include "qasir/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace qasir {

namespace {

Eigen::VectorXd gaussian(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        v(i) = n(rng);
    }
    return v;
}

Eigen::VectorXd unit(std::mt19937_64& rng, Eigen::Index d) {
    for (;;) {
        Eigen::VectorXd v = gaussian(rng, d);
        const double norm = v.norm();
        if (norm > 1e-12) {
            return v / norm;
        }
    }
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

} // namespace

SynthCorpus generate(const SynthConfig& c) {
    if (c.num_videos == 0 || c.k_min == 0 || c.k_max < c.k_min || c.d < 1 || c.queries_per_video == 0) {
        throw InvalidInput("synthetic corpus needs positive sizes with k_min <= k_max");
    }
    if (!(c.moment_fraction > 0.0) || c.moment_fraction > 1.0 || !(c.noise_sigma >= 0.0)) {
        throw InvalidInput("moment fraction must lie in (0, 1] and sigma must be non-negative");
    }
    std::mt19937_64 rng(c.seed);
    const double noise_scale = c.noise_sigma / std::sqrt(static_cast<double>(c.d));

    std::vector<VideoEmbedding> videos;
    std::vector<QueryEmbedding> queries;
    SynthCorpus out;
    out.manifest.dataset = "synthetic";
    for (std::size_t v = 0; v < c.num_videos; ++v) {
        const std::size_t k = c.k_min + uniform_index(rng, c.k_max - c.k_min + 1);
        const auto block = static_cast<std::size_t>(std::ceil(c.moment_fraction * static_cast<double>(k) - 1e-9));
        if (block * c.queries_per_video > k) {
            throw InvalidInput("planted moments do not fit in a video with " + std::to_string(k) + " rows");
        }
        VideoEmbedding video;
        video.video_id = "v" + std::to_string(v);
        video.normalized = true;
        video.matrix.resize(static_cast<Eigen::Index>(k), c.d);
        for (std::size_t r = 0; r < k; ++r) {
            video.matrix.row(static_cast<Eigen::Index>(r)) = unit(rng, c.d).transpose();
        }

        // Disjoint blocks: split the free rows into queries_per_video + 1 random gaps.
        const std::size_t free_rows = k - block * c.queries_per_video;
        std::vector<std::size_t> cuts(c.queries_per_video);
        for (auto& x : cuts) {
            x = uniform_index(rng, free_rows + 1);
        }
        std::sort(cuts.begin(), cuts.end());

        for (std::size_t qi = 0; qi < c.queries_per_video; ++qi) {
            const std::size_t offset = cuts[qi] + qi * block;
            QueryEmbedding q;
            q.query_id = video.video_id + "q" + std::to_string(qi);
            q.video_id = video.video_id;
            q.vector = unit(rng, c.d);
            for (std::size_t r = offset; r < offset + block; ++r) {
                const Eigen::VectorXd planted = q.vector + noise_scale * gaussian(rng, c.d);
                video.matrix.row(static_cast<Eigen::Index>(r)) = l2_normalize(planted).transpose();
            }
            q.moment_span = MomentSpan{static_cast<double>(offset), static_cast<double>(offset + block)};
            out.manifest.queries.push_back({q.query_id, "synthetic moment " + q.query_id, q.video_id, q.moment_span});
            queries.push_back(std::move(q));
        }
        out.manifest.videos.push_back({video.video_id, static_cast<double>(k), {}, std::nullopt});
        videos.push_back(std::move(video));
    }
    out.store = EmbeddingStore(std::move(videos), std::move(queries));
    return out;
}

} // namespace qasir
