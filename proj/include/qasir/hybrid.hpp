#pragma once

#include "qasir/cost_model.hpp"
#include "qasir/scoring.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace qasir {

// One retrieval model: its own encoded corpus plus the grid/backbone it was built with.
struct RetrievalModel {
    std::string name;
    std::shared_ptr<const RankingIndex> index;
    std::string backbone = "clip-b32";
    int grid = 1;
    HeadDescription head;  // images/d are filled from the dataset when costing
};

struct HybridConfig {
    RetrievalModel high;  // cheap screening model
    RetrievalModel low;   // expensive re-ranking model
    std::size_t R = 400;
};

// Full corpus ranking under the high model, ids only.
std::vector<std::string> screen(const Eigen::VectorXd& query, const RetrievalModel& high);

enum class Stage { reranked, screened };

std::string to_string(Stage s);

struct HybridEntry {
    std::string video_id;
    Stage stage = Stage::screened;
    double score = 0.0;  // low-model score when reranked, high-model score otherwise

    bool operator==(const HybridEntry&) const = default;
};

// Top min(R, n) screened videos re-ordered by the low model, the rest in screening order.
// Each model takes the query embedding from its own encoder.
std::vector<HybridEntry> hybrid_retrieve(const Eigen::VectorXd& high_query, const Eigen::VectorXd& low_query,
                                         const HybridConfig& config);

struct HybridCost {
    PipelineCost high;
    PipelineCost low;
    double rerank_fraction = 0.0;  // min(R, n) / n
    double total = 0.0;
};

// Per video-query pair: every video goes through the high model, a min(R, n)/n share of
// pairs also goes through the low model.
HybridCost hybrid_cost(const HybridConfig& config, const DatasetStats& stats, std::size_t corpus_size = 0);

} // namespace qasir
