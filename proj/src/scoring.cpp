#include "qasir/scoring.hpp"

#include "qasir/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace qasir {

Pooling parse_pooling(const std::string& name) {
    if (name == "attn" || name == "attention") {
        return Pooling::attention;
    }
    if (name == "mean") {
        return Pooling::mean;
    }
    if (name == "max") {
        return Pooling::max;
    }
    throw ConfigError("unknown pooling mode: " + name);
}

std::string to_string(Pooling p) {
    switch (p) {
    case Pooling::attention:
        return "attn";
    case Pooling::mean:
        return "mean";
    case Pooling::max:
        return "max";
    }
    return "?";
}

Eigen::VectorXd attention_weights(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query, double temperature) {
    if (rows.rows() == 0) {
        throw InvalidInput("attention needs at least one super-image embedding");
    }
    if (rows.cols() != query.size()) {
        throw InvalidInput("query dimension does not match the embedding rows");
    }
    if (!(temperature > 0.0)) {
        throw InvalidInput("temperature must be positive");
    }
    Eigen::VectorXd logits = rows * query / temperature;
    logits.array() -= logits.maxCoeff();
    Eigen::VectorXd w = logits.array().exp();
    return w / w.sum();
}

Eigen::VectorXd aggregate(const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights) {
    if (weights.size() != rows.rows()) {
        throw InvalidInput("weight count does not match the number of rows");
    }
    return rows.transpose() * weights;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) {
        throw InvalidInput("cosine of vectors with different dimensions");
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw DegenerateInput("cosine similarity with a zero vector");
    }
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

AttentionResult attend(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query, double temperature) {
    AttentionResult r;
    r.weights = attention_weights(rows, query, temperature);
    r.aggregated = aggregate(rows, r.weights);
    r.score = cosine(r.aggregated, query);
    return r;
}

double score_zero_shot(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query, double temperature) {
    return attend(rows, query, temperature).score;
}

double score_pooled(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query, Pooling mode) {
    if (rows.rows() == 0) {
        throw InvalidInput("pooling needs at least one super-image embedding");
    }
    switch (mode) {
    case Pooling::mean:
        return cosine(rows.colwise().mean().transpose(), query);
    case Pooling::max:
        return cosine(rows.colwise().maxCoeff().transpose(), query);
    case Pooling::attention:
        return score_zero_shot(rows, query);
    }
    throw InvalidInput("unknown pooling mode");
}

double PoolingScorer::similarity(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query) const {
    if (mode_ == Pooling::attention) {
        return score_zero_shot(rows, query, temperature_);
    }
    return score_pooled(rows, query, mode_);
}

void sort_ranking(std::vector<RankedVideo>& ranking) {
    std::sort(ranking.begin(), ranking.end(), [](const RankedVideo& a, const RankedVideo& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.video_id < b.video_id;
    });
}

RankingIndex::RankingIndex(std::span<const VideoEmbedding> videos, std::shared_ptr<const Scorer> scorer)
    : scorer_(std::move(scorer)) {
    if (!scorer_) {
        throw InvalidInput("ranking index needs a scorer");
    }
    ids_.reserve(videos.size());
    encoded_.resize(videos.size());
    for (const auto& v : videos) {
        ids_.push_back(v.video_id);
    }
    parallel_for(videos.size(), default_thread_count(),
                 [&](std::size_t i) { encoded_[i] = scorer_->encode_video(videos[i].matrix); });
}

std::optional<std::size_t> RankingIndex::find(const std::string& video_id) const {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i] == video_id) {
            return i;
        }
    }
    return std::nullopt;
}

double RankingIndex::score(std::size_t video, const Eigen::VectorXd& encoded_query) const {
    return scorer_->similarity(encoded_[video], encoded_query);
}

std::vector<RankedVideo> RankingIndex::rank(const Eigen::VectorXd& query) const {
    if (ids_.empty()) {
        throw InvalidInput("cannot rank an empty corpus");
    }
    const Eigen::VectorXd q = encode_query(query);
    std::vector<RankedVideo> out;
    out.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        out.push_back({ids_[i], score(i, q)});
    }
    sort_ranking(out);
    return out;
}

std::vector<RankedVideo> RankingIndex::rank_subset(const Eigen::VectorXd& query,
                                                   std::span<const std::size_t> subset) const {
    const Eigen::VectorXd q = encode_query(query);
    std::vector<RankedVideo> out;
    out.reserve(subset.size());
    for (auto i : subset) {
        out.push_back({ids_.at(i), score(i, q)});
    }
    sort_ranking(out);
    return out;
}

std::vector<RankedVideo> rank_corpus(const QueryEmbedding& query, std::span<const VideoEmbedding> corpus,
                                     const Scorer& scorer) {
    if (corpus.empty()) {
        throw InvalidInput("cannot rank an empty corpus");
    }
    const Eigen::VectorXd q = scorer.encode_query(query.vector);
    std::vector<RankedVideo> out;
    out.reserve(corpus.size());
    for (const auto& v : corpus) {
        out.push_back({v.video_id, scorer.similarity(scorer.encode_video(v.matrix), q)});
    }
    sort_ranking(out);
    return out;
}

unsigned default_thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QASIR_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) {
            return std::min(hw, static_cast<unsigned>(v));
        }
    }
    return hw;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) {
        threads = default_thread_count();
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

std::vector<QueryRanking> rank_all(std::span<const QueryEmbedding> queries, const RankingIndex& index,
                                   unsigned threads) {
    std::vector<QueryRanking> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        out[i].query_id = queries[i].query_id;
        out[i].ranking = index.rank(queries[i].vector);
    });
    return out;
}

} // namespace qasir
