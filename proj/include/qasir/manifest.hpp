#pragma once

#include "qasir/embedding_store.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qasir {

struct ManifestVideo {
    std::string video_id;
    double duration_sec = 0.0;
    std::vector<std::filesystem::path> frames;  // resolved against the manifest directory
    std::optional<std::filesystem::path> embedding;
};

struct ManifestQuery {
    std::string query_id;
    std::string text;
    std::string video_id;
    std::optional<MomentSpan> span;
};

struct Manifest {
    std::string dataset;
    std::vector<ManifestVideo> videos;
    std::vector<ManifestQuery> queries;

    const ManifestVideo* find_video(const std::string& id) const;
    std::map<std::string, double> durations() const;
};

// JSON object {"dataset", "videos": [{"video_id", "duration_sec", "frames", "embedding"}],
// "queries": [{"query_id", "text", "video_id", "span": [s, e]}]}.
// Checks unique ids, known query targets and, with check_files, that every path exists.
Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir = {},
                        bool check_files = false);
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);

std::string manifest_to_json(const Manifest& m);
void save_manifest(const std::filesystem::path& path, const Manifest& m);

} // namespace qasir
