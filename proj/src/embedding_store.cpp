#include "qasir/embedding_store.hpp"

#include "qasir/errors.hpp"
#include "byte_io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace qasir {

using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr char kMagic[4] = {'Q', 'E', 'M', 'B'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kVideoRecord = 0;
constexpr std::uint8_t kQueryRecord = 1;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void validate_span(const MomentSpan& s, std::uint64_t offset) {
    if (!std::isfinite(s.start_sec) || !std::isfinite(s.end_sec) || s.start_sec < 0.0 || !(s.start_sec < s.end_sec)) {
        throw FormatError("moment span must satisfy 0 <= start < end", offset);
    }
}

} // namespace

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegenerateInput("cannot normalize a zero or non-finite vector");
    }
    return v / n;
}

EmbeddingStore::EmbeddingStore(std::vector<VideoEmbedding> videos, std::vector<QueryEmbedding> queries)
    : videos_(std::move(videos)), queries_(std::move(queries)) {
    for (std::size_t i = 0; i < videos_.size(); ++i) {
        const auto& v = videos_[i];
        if (v.matrix.rows() < 1) {
            throw InvalidInput("video " + v.video_id + " has no super-image embeddings");
        }
        if (dim_ == 0) {
            dim_ = v.matrix.cols();
        } else if (v.matrix.cols() != dim_) {
            throw InvalidInput("video " + v.video_id + " has dimension " + std::to_string(v.matrix.cols()) +
                               ", expected " + std::to_string(dim_));
        }
        if (!all_finite(v.matrix)) {
            throw InvalidInput("video " + v.video_id + " contains non-finite values");
        }
        if (!video_ids_.emplace(v.video_id, i).second) {
            throw InvalidInput("duplicate video id " + v.video_id);
        }
    }
    for (std::size_t i = 0; i < queries_.size(); ++i) {
        const auto& q = queries_[i];
        if (dim_ == 0) {
            dim_ = q.vector.size();
        } else if (q.vector.size() != dim_) {
            throw InvalidInput("query " + q.query_id + " has dimension " + std::to_string(q.vector.size()) +
                               ", expected " + std::to_string(dim_));
        }
        if (!q.vector.allFinite()) {
            throw InvalidInput("query " + q.query_id + " contains non-finite values");
        }
        if (q.moment_span && !(q.moment_span->start_sec >= 0.0 && q.moment_span->start_sec < q.moment_span->end_sec)) {
            throw InvalidInput("query " + q.query_id + " has an invalid moment span");
        }
        if (!query_ids_.emplace(q.query_id, i).second) {
            throw InvalidInput("duplicate query id " + q.query_id);
        }
    }
    if (dim_ == 0 && (!videos_.empty() || !queries_.empty())) {
        throw InvalidInput("embedding dimension must be positive");
    }
}

const VideoEmbedding* EmbeddingStore::find_video(const std::string& id) const {
    const auto it = video_ids_.find(id);
    return it == video_ids_.end() ? nullptr : &videos_[it->second];
}

const QueryEmbedding* EmbeddingStore::find_query(const std::string& id) const {
    const auto it = query_ids_.find(id);
    return it == query_ids_.end() ? nullptr : &queries_[it->second];
}

std::optional<std::size_t> EmbeddingStore::video_index(const std::string& id) const {
    const auto it = video_ids_.find(id);
    if (it == video_ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

EmbeddingStore EmbeddingStore::normalized() const {
    std::vector<VideoEmbedding> videos = videos_;
    for (auto& v : videos) {
        for (Eigen::Index r = 0; r < v.matrix.rows(); ++r) {
            v.matrix.row(r) = l2_normalize(v.matrix.row(r).transpose()).transpose();
        }
        v.normalized = true;
    }
    std::vector<QueryEmbedding> queries = queries_;
    for (auto& q : queries) {
        q.vector = l2_normalize(q.vector);
    }
    return EmbeddingStore(std::move(videos), std::move(queries));
}

EmbeddingStore EmbeddingStore::merged(const EmbeddingStore& other) const {
    std::vector<VideoEmbedding> videos = videos_;
    videos.insert(videos.end(), other.videos_.begin(), other.videos_.end());
    std::vector<QueryEmbedding> queries = queries_;
    queries.insert(queries.end(), other.queries_.begin(), other.queries_.end());
    return EmbeddingStore(std::move(videos), std::move(queries));
}

std::vector<std::uint8_t> encode_qemb(const EmbeddingStore& store) {
    ByteWriter w;
    w.bytes(kMagic, sizeof(kMagic));
    w.uint(kVersion);
    w.uint(static_cast<std::uint32_t>(store.dim()));
    w.uint(static_cast<std::uint64_t>(store.videos().size() + store.queries().size()));
    for (const auto& v : store.videos()) {
        w.uint(kVideoRecord);
        w.str16(v.video_id);
        w.uint(static_cast<std::uint32_t>(v.matrix.rows()));
        for (Eigen::Index r = 0; r < v.matrix.rows(); ++r) {
            for (Eigen::Index c = 0; c < v.matrix.cols(); ++c) {
                w.f32(v.matrix(r, c));
            }
        }
    }
    for (const auto& q : store.queries()) {
        w.uint(kQueryRecord);
        w.str16(q.query_id);
        w.str16(q.video_id);
        w.uint(static_cast<std::uint8_t>(q.moment_span ? 1 : 0));
        if (q.moment_span) {
            w.f64(q.moment_span->start_sec);
            w.f64(q.moment_span->end_sec);
        }
        for (Eigen::Index c = 0; c < q.vector.size(); ++c) {
            w.f32(q.vector(c));
        }
    }
    return w.take();
}

EmbeddingStore decode_qemb(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("magic mismatch: not a QEMB file", 0);
    }
    r.uint<std::uint32_t>("magic");
    const auto version_at = r.offset();
    const auto version = r.uint<std::uint16_t>("version");
    if (version != kVersion) {
        throw FormatError("unsupported QEMB version " + std::to_string(version), version_at);
    }
    const auto dim_at = r.offset();
    const auto d = r.uint<std::uint32_t>("dimension");
    const auto count = r.uint<std::uint64_t>("record count");
    if (d == 0 && count > 0) {
        throw FormatError("dimension inconsistency: d = 0 with records present", dim_at);
    }

    std::vector<VideoEmbedding> videos;
    std::vector<QueryEmbedding> queries;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto record_at = r.offset();
        const auto type = r.uint<std::uint8_t>("record type");
        if (type == kVideoRecord) {
            VideoEmbedding v;
            v.video_id = r.str16("video id");
            const auto k_at = r.offset();
            const auto k = r.uint<std::uint32_t>("super-image count");
            if (k == 0) {
                throw FormatError("video " + v.video_id + " has K = 0", k_at);
            }
            r.need(static_cast<std::size_t>(k) * d * 4, "video matrix payload");
            v.matrix.resize(k, d);
            for (std::uint32_t row = 0; row < k; ++row) {
                for (std::uint32_t c = 0; c < d; ++c) {
                    v.matrix(row, c) = r.f32("matrix value");
                }
            }
            if (!all_finite(v.matrix)) {
                throw FormatError("video " + v.video_id + " contains non-finite values", record_at);
            }
            videos.push_back(std::move(v));
        } else if (type == kQueryRecord) {
            QueryEmbedding q;
            q.query_id = r.str16("query id");
            q.video_id = r.str16("target video id");
            const auto has_span_at = r.offset();
            const auto has_span = r.uint<std::uint8_t>("span flag");
            if (has_span > 1) {
                throw FormatError("span flag must be 0 or 1", has_span_at);
            }
            if (has_span == 1) {
                MomentSpan s;
                s.start_sec = r.f64("span start");
                s.end_sec = r.f64("span end");
                validate_span(s, has_span_at);
                q.moment_span = s;
            }
            r.need(static_cast<std::size_t>(d) * 4, "query vector payload");
            q.vector.resize(d);
            for (std::uint32_t c = 0; c < d; ++c) {
                q.vector(c) = r.f32("vector value");
            }
            if (!q.vector.allFinite()) {
                throw FormatError("query " + q.query_id + " contains non-finite values", record_at);
            }
            queries.push_back(std::move(q));
        } else {
            throw FormatError("unknown record type " + std::to_string(type), record_at);
        }
    }
    if (!r.done()) {
        throw FormatError("trailing bytes after the last record", r.offset());
    }
    try {
        return EmbeddingStore(std::move(videos), std::move(queries));
    } catch (const InvalidInput& e) {
        throw FormatError(e.what(), r.offset());
    }
}

std::string encode_jsonl(const EmbeddingStore& store) {
    using nlohmann::json;
    std::ostringstream out;
    auto as_f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (const auto& v : store.videos()) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < v.matrix.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < v.matrix.cols(); ++c) {
                row.push_back(as_f32(v.matrix(r, c)));
            }
            rows.push_back(std::move(row));
        }
        out << json{{"type", "video"}, {"id", v.video_id}, {"normalized", v.normalized}, {"rows", rows}}.dump()
            << '\n';
    }
    for (const auto& q : store.queries()) {
        json vec = json::array();
        for (Eigen::Index c = 0; c < q.vector.size(); ++c) {
            vec.push_back(as_f32(q.vector(c)));
        }
        json rec{{"type", "query"}, {"id", q.query_id}, {"video_id", q.video_id}, {"vector", vec}};
        if (q.moment_span) {
            rec["span"] = {q.moment_span->start_sec, q.moment_span->end_sec};
        }
        out << rec.dump() << '\n';
    }
    return out.str();
}

EmbeddingStore decode_jsonl(std::string_view text) {
    using nlohmann::json;
    std::vector<VideoEmbedding> videos;
    std::vector<QueryEmbedding> queries;
    Eigen::Index dim = 0;
    std::size_t pos = 0;

    auto check_dim = [&](Eigen::Index n, std::size_t at) {
        if (n == 0) {
            throw FormatError("empty embedding vector", at);
        }
        if (dim == 0) {
            dim = n;
        } else if (n != dim) {
            throw FormatError("dimension inconsistency: got " + std::to_string(n) + ", expected " +
                                  std::to_string(dim),
                              at);
        }
    };

    while (pos < text.size()) {
        const std::size_t line_at = pos;
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(line);
            const std::string type = rec.at("type").get<std::string>();
            if (type == "video") {
                VideoEmbedding v;
                v.video_id = rec.at("id").get<std::string>();
                v.normalized = rec.value("normalized", false);
                const auto& rows = rec.at("rows");
                if (!rows.is_array() || rows.empty()) {
                    throw FormatError("video " + v.video_id + " has no rows", line_at);
                }
                check_dim(static_cast<Eigen::Index>(rows[0].size()), line_at);
                v.matrix.resize(static_cast<Eigen::Index>(rows.size()), dim);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    check_dim(static_cast<Eigen::Index>(rows[r].size()), line_at);
                    for (Eigen::Index c = 0; c < dim; ++c) {
                        v.matrix(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)].get<double>();
                    }
                }
                videos.push_back(std::move(v));
            } else if (type == "query") {
                QueryEmbedding q;
                q.query_id = rec.at("id").get<std::string>();
                q.video_id = rec.at("video_id").get<std::string>();
                const auto& vec = rec.at("vector");
                check_dim(static_cast<Eigen::Index>(vec.size()), line_at);
                q.vector.resize(dim);
                for (Eigen::Index c = 0; c < dim; ++c) {
                    q.vector(c) = vec[static_cast<std::size_t>(c)].get<double>();
                }
                if (rec.contains("span") && !rec["span"].is_null()) {
                    MomentSpan s{rec["span"].at(0).get<double>(), rec["span"].at(1).get<double>()};
                    validate_span(s, line_at);
                    q.moment_span = s;
                }
                queries.push_back(std::move(q));
            } else {
                throw FormatError("unknown record type " + type, line_at);
            }
        } catch (const json::exception& e) {
            throw FormatError(std::string("malformed JSON record: ") + e.what(), line_at);
        }
    }
    try {
        return EmbeddingStore(std::move(videos), std::move(queries));
    } catch (const InvalidInput& e) {
        throw FormatError(e.what(), text.size());
    }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store, EmbeddingFormat format) {
    if (format == EmbeddingFormat::binary) {
        write_file_bytes(path, encode_qemb(store));
        return;
    }
    const std::string text = encode_jsonl(store);
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

EmbeddingStore ingest(const std::filesystem::path& path, LoadOptions options) {
    const auto bytes = read_file_bytes(path);
    EmbeddingStore store;
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
        store = decode_qemb(bytes);
    } else if (!bytes.empty() && (bytes[0] == '{' || bytes[0] == ' ' || bytes[0] == '\n')) {
        store = decode_jsonl(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } else {
        throw FormatError("magic mismatch: not a QEMB file", 0);
    }
    return options.normalize ? store.normalized() : store;
}

} // namespace qasir
