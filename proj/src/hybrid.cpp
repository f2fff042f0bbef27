#include "qasir/hybrid.hpp"

#include "qasir/errors.hpp"

#include <algorithm>

namespace qasir {

namespace {

void check(const RetrievalModel& m) {
    if (!m.index || m.index->size() == 0) {
        throw InvalidInput("model " + m.name + " has an empty corpus");
    }
}

PipelineCost model_cost(const RetrievalModel& m, const DatasetStats& stats) {
    const auto& profile = find_profile(m.backbone);
    HeadDescription head = m.head;
    head.images = stats.images(m.grid);
    head.d = profile.d;
    return video_text_gflops(profile, head.images, head_flops(head));
}

} // namespace

std::vector<std::string> screen(const Eigen::VectorXd& query, const RetrievalModel& high) {
    check(high);
    std::vector<std::string> ids;
    for (auto& r : high.index->rank(query)) {
        ids.push_back(std::move(r.video_id));
    }
    return ids;
}

std::string to_string(Stage s) {
    return s == Stage::reranked ? "reranked" : "screened";
}

std::vector<HybridEntry> hybrid_retrieve(const Eigen::VectorXd& high_query, const Eigen::VectorXd& low_query,
                                         const HybridConfig& config) {
    if (config.R < 1) {
        throw InvalidInput("R must be at least 1");
    }
    check(config.high);
    check(config.low);
    if (config.high.index->size() != config.low.index->size()) {
        throw InvalidInput("high and low models must index the same corpus");
    }
    const auto screened = config.high.index->rank(high_query);
    const std::size_t top = std::min(config.R, screened.size());

    std::vector<std::size_t> candidates;
    candidates.reserve(top);
    for (std::size_t i = 0; i < top; ++i) {
        const auto pos = config.low.index->find(screened[i].video_id);
        if (!pos) {
            throw InvalidInput("video " + screened[i].video_id + " is missing from the low model corpus");
        }
        candidates.push_back(*pos);
    }

    std::vector<HybridEntry> out;
    out.reserve(screened.size());
    for (auto& r : config.low.index->rank_subset(low_query, candidates)) {
        out.push_back({std::move(r.video_id), Stage::reranked, r.score});
    }
    for (std::size_t i = top; i < screened.size(); ++i) {
        out.push_back({screened[i].video_id, Stage::screened, screened[i].score});
    }
    return out;
}

HybridCost hybrid_cost(const HybridConfig& config, const DatasetStats& stats, std::size_t corpus_size) {
    if (config.R < 1) {
        throw InvalidInput("R must be at least 1");
    }
    const std::size_t n = corpus_size > 0 ? corpus_size : stats.test_videos;
    if (n == 0) {
        throw ConfigError("corpus size unknown for " + stats.name + "; pass it explicitly");
    }
    HybridCost c;
    c.high = model_cost(config.high, stats);
    c.low = model_cost(config.low, stats);
    c.rerank_fraction = static_cast<double>(std::min(config.R, n)) / static_cast<double>(n);
    c.total = c.high.total + c.rerank_fraction * c.low.total;
    return c;
}

} // namespace qasir
