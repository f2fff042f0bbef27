#pragma once

#include "qasir/embedding_store.hpp"
#include "qasir/scoring.hpp"

#include <array>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace qasir {

inline constexpr std::array<std::size_t, 4> kRecallCutoffs = {1, 5, 10, 100};

// query_id -> its single positive video_id
using GroundTruth = std::map<std::string, std::string>;

GroundTruth ground_truth(std::span<const QueryEmbedding> queries);

// 1-based rank of the positive, 0 when absent from the ranking.
std::size_t positive_rank(const QueryRanking& ranking, const std::string& positive);

// 100 * share of truth queries with the positive within the top k.
// Throws InvalidInput when a truth query has no ranking.
double recall_at_k(std::span<const QueryRanking> rankings, const GroundTruth& truth, std::size_t k);

enum class MvGroup { short_moment, middle_moment, long_moment };

std::string to_string(MvGroup g);

struct MomentAnnotation {
    std::string query_id;
    double ratio = 0.0;  // moment length / video duration
};

// (0, 0.2] short, (0.2, 0.4] middle, (0.4, 1] long. Throws InvalidInput outside (0, 1].
MvGroup mv_group(double ratio);
std::map<MvGroup, std::vector<std::string>> mv_group(std::span<const MomentAnnotation> annotations);

// Ratios for every query with a span, using per-video durations.
std::vector<MomentAnnotation> moment_annotations(std::span<const QueryEmbedding> queries,
                                                 const std::map<std::string, double>& durations);

struct RecallSet {
    std::size_t num_queries = 0;
    std::array<double, 4> recall{};  // aligned with kRecallCutoffs
    double sum_r = 0.0;
};

struct EvalReport {
    RecallSet overall;
    std::map<MvGroup, RecallSet> grouped;  // only filled when annotations are given

    double recall_at(std::size_t k) const;
};

EvalReport report(std::span<const QueryRanking> rankings, const GroundTruth& truth,
                  std::span<const MomentAnnotation> annotations = {});

void write_report_csv(std::ostream& out, const EvalReport& r);
void write_report_table(std::ostream& out, const EvalReport& r);

} // namespace qasir
