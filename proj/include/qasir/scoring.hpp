#pragma once

#include "qasir/embedding_store.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qasir {

enum class Pooling { attention, mean, max };

Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling p);

struct AttentionResult {
    Eigen::VectorXd weights;     // one per super image, sums to 1
    Eigen::VectorXd aggregated;  // convex combination of the rows
    double score = 0.0;          // cosine(aggregated, query)
};

// softmax_k(z_k . q / temperature), max-subtracted. temperature = 1 is the faithful setting.
Eigen::VectorXd attention_weights(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query,
                                  double temperature = 1.0);

// sum_k w_k z_k
Eigen::VectorXd aggregate(const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights);

// Throws DegenerateInput when either side has zero norm.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

AttentionResult attend(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query, double temperature = 1.0);

double score_zero_shot(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query, double temperature = 1.0);

// mean: cosine of the row mean. max: cosine of the element-wise max over rows.
double score_pooled(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query, Pooling mode);

// A retrieval model split so the query-independent half can be cached per video.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual Eigen::MatrixXd encode_video(const Eigen::MatrixXd& rows) const { return rows; }
    virtual Eigen::VectorXd encode_query(const Eigen::VectorXd& query) const { return query; }
    virtual double similarity(const Eigen::MatrixXd& encoded_video, const Eigen::VectorXd& encoded_query) const = 0;

    double score(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query) const {
        return similarity(encode_video(rows), encode_query(query));
    }
};

// Zero-shot scorer over raw embeddings.
class PoolingScorer : public Scorer {
public:
    explicit PoolingScorer(Pooling mode = Pooling::attention, double temperature = 1.0)
        : mode_(mode), temperature_(temperature) {}

    double similarity(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query) const override;

private:
    Pooling mode_;
    double temperature_;
};

struct RankedVideo {
    std::string video_id;
    double score = 0.0;

    bool operator==(const RankedVideo&) const = default;
};

// Descending score, ties by ascending video_id.
void sort_ranking(std::vector<RankedVideo>& ranking);

// Videos encoded once by a scorer; reused across queries.
class RankingIndex {
public:
    RankingIndex(std::span<const VideoEmbedding> videos, std::shared_ptr<const Scorer> scorer);

    std::size_t size() const { return ids_.size(); }
    const std::string& video_id(std::size_t i) const { return ids_[i]; }
    std::optional<std::size_t> find(const std::string& video_id) const;
    const Scorer& scorer() const { return *scorer_; }

    Eigen::VectorXd encode_query(const Eigen::VectorXd& query) const { return scorer_->encode_query(query); }
    double score(std::size_t video, const Eigen::VectorXd& encoded_query) const;

    // Full corpus ranking.
    std::vector<RankedVideo> rank(const Eigen::VectorXd& query) const;
    // Ranking restricted to the given video positions.
    std::vector<RankedVideo> rank_subset(const Eigen::VectorXd& query, std::span<const std::size_t> subset) const;

private:
    std::vector<std::string> ids_;
    std::vector<Eigen::MatrixXd> encoded_;
    std::shared_ptr<const Scorer> scorer_;
};

std::vector<RankedVideo> rank_corpus(const QueryEmbedding& query, std::span<const VideoEmbedding> corpus,
                                     const Scorer& scorer);

struct QueryRanking {
    std::string query_id;
    std::vector<RankedVideo> ranking;
};

// One ranking per query, in query order. Work is split over `threads` workers
// (0 = QASIR_THREADS or hardware concurrency); output order never depends on scheduling.
std::vector<QueryRanking> rank_all(std::span<const QueryEmbedding> queries, const RankingIndex& index,
                                   unsigned threads = 0);

// Worker count from QASIR_THREADS, capped to hardware concurrency.
unsigned default_thread_count();

// Runs fn(i) for i in [0, n) across worker threads.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

} // namespace qasir
