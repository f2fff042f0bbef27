#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qasir {

struct MomentSpan {
    double start_sec = 0.0;
    double end_sec = 0.0;

    double length() const { return end_sec - start_sec; }
    bool operator==(const MomentSpan&) const = default;
};

// One video: K super-image embeddings of dimension d, one per row, in super-image order.
struct VideoEmbedding {
    std::string video_id;
    Eigen::MatrixXd matrix;
    bool normalized = false;

    Eigen::Index count() const { return matrix.rows(); }
    Eigen::Index dim() const { return matrix.cols(); }
};

struct QueryEmbedding {
    std::string query_id;
    std::string video_id;  // ground-truth target
    Eigen::VectorXd vector;
    std::optional<MomentSpan> moment_span;
};

enum class EmbeddingFormat { binary, jsonl };

struct LoadOptions {
    bool normalize = true;
};

// Unit-norm copy of v. Throws DegenerateInput on a zero (or non-finite) vector.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

// Immutable once built: lookups return the same object on every call and concurrent
// readers need no locking.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    EmbeddingStore(std::vector<VideoEmbedding> videos, std::vector<QueryEmbedding> queries);

    std::span<const VideoEmbedding> videos() const { return videos_; }
    std::span<const QueryEmbedding> queries() const { return queries_; }

    // 0 when the store is empty.
    Eigen::Index dim() const { return dim_; }

    const VideoEmbedding* find_video(const std::string& id) const;
    const QueryEmbedding* find_query(const std::string& id) const;
    std::optional<std::size_t> video_index(const std::string& id) const;

    // Every video row and query vector scaled to unit length.
    EmbeddingStore normalized() const;

    // Videos and queries from both stores; ids must stay unique and d must agree.
    EmbeddingStore merged(const EmbeddingStore& other) const;

private:
    std::vector<VideoEmbedding> videos_;
    std::vector<QueryEmbedding> queries_;
    std::map<std::string, std::size_t> video_ids_;
    std::map<std::string, std::size_t> query_ids_;
    Eigen::Index dim_ = 0;
};

// QEMB, little-endian: "QEMB", u16 version=1, u32 d, u64 record_count, then records.
// Video record:  u8 0, u16 id_len, id, u32 K, K*d f32 row-major.
// Query record:  u8 1, u16 id_len, id, u16 target_len, target, u8 has_span, [f64 start, f64 end], d f32.
std::vector<std::uint8_t> encode_qemb(const EmbeddingStore& store);
EmbeddingStore decode_qemb(std::span<const std::uint8_t> bytes);

// Debug mirror: one JSON object per line, {"type":"video","id":..,"rows":[[..],..]} or
// {"type":"query","id":..,"video_id":..,"vector":[..],"span":[s,e]}.
std::string encode_jsonl(const EmbeddingStore& store);
EmbeddingStore decode_jsonl(std::string_view text);

void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store,
                      EmbeddingFormat format = EmbeddingFormat::binary);

// Format is sniffed from the magic bytes. Rows and queries are normalized unless
// options.normalize is false.
EmbeddingStore ingest(const std::filesystem::path& path, LoadOptions options = {});

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace qasir
