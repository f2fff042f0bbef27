#include "qasir/manifest.hpp"

#include "qasir/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace qasir {

using nlohmann::json;

const ManifestVideo* Manifest::find_video(const std::string& id) const {
    for (const auto& v : videos) {
        if (v.video_id == id) {
            return &v;
        }
    }
    return nullptr;
}

std::map<std::string, double> Manifest::durations() const {
    std::map<std::string, double> d;
    for (const auto& v : videos) {
        d[v.video_id] = v.duration_sec;
    }
    return d;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void require_exists(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) {
        throw IoError("manifest references a missing file: " + p.string());
    }
}

} // namespace

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir, bool check_files) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("manifest is not valid JSON: ") + e.what());
    }
    Manifest m;
    try {
        m.dataset = doc.value("dataset", std::string());
        std::set<std::string> video_ids;
        for (const auto& v : doc.value("videos", json::array())) {
            ManifestVideo mv;
            mv.video_id = v.at("video_id").get<std::string>();
            mv.duration_sec = v.value("duration_sec", 0.0);
            if (mv.duration_sec < 0.0) {
                throw InvalidInput("video " + mv.video_id + " has a negative duration");
            }
            for (const auto& f : v.value("frames", json::array())) {
                mv.frames.push_back(resolve(base_dir, f.get<std::string>()));
            }
            if (v.contains("embedding")) {
                mv.embedding = resolve(base_dir, v.at("embedding").get<std::string>());
            }
            if (!video_ids.insert(mv.video_id).second) {
                throw InvalidInput("duplicate video id in manifest: " + mv.video_id);
            }
            m.videos.push_back(std::move(mv));
        }
        std::set<std::string> query_ids;
        for (const auto& q : doc.value("queries", json::array())) {
            ManifestQuery mq;
            mq.query_id = q.at("query_id").get<std::string>();
            mq.text = q.value("text", std::string());
            mq.video_id = q.at("video_id").get<std::string>();
            if (q.contains("span") && !q.at("span").is_null()) {
                const auto s = q.at("span").get<std::vector<double>>();
                if (s.size() != 2 || !(s[0] >= 0.0) || !(s[0] < s[1])) {
                    throw InvalidInput("query " + mq.query_id + " has an invalid span");
                }
                mq.span = MomentSpan{s[0], s[1]};
            }
            if (!query_ids.insert(mq.query_id).second) {
                throw InvalidInput("duplicate query id in manifest: " + mq.query_id);
            }
            if (!video_ids.count(mq.video_id)) {
                throw InvalidInput("query " + mq.query_id + " targets unknown video " + mq.video_id);
            }
            m.queries.push_back(std::move(mq));
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed manifest: ") + e.what());
    }
    if (check_files) {
        for (const auto& v : m.videos) {
            for (const auto& f : v.frames) {
                require_exists(f);
            }
            if (v.embedding) {
                require_exists(*v.embedding);
            }
        }
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path, bool check_files) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), path.parent_path(), check_files);
}

std::string manifest_to_json(const Manifest& m) {
    json doc;
    doc["dataset"] = m.dataset;
    doc["videos"] = json::array();
    for (const auto& v : m.videos) {
        json jv{{"video_id", v.video_id}, {"duration_sec", v.duration_sec}};
        jv["frames"] = json::array();
        for (const auto& f : v.frames) {
            jv["frames"].push_back(f.generic_string());
        }
        if (v.embedding) {
            jv["embedding"] = v.embedding->generic_string();
        }
        doc["videos"].push_back(std::move(jv));
    }
    doc["queries"] = json::array();
    for (const auto& q : m.queries) {
        json jq{{"query_id", q.query_id}, {"text", q.text}, {"video_id", q.video_id}};
        if (q.span) {
            jq["span"] = {q.span->start_sec, q.span->end_sec};
        }
        doc["queries"].push_back(std::move(jq));
    }
    return doc.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << manifest_to_json(m);
}

} // namespace qasir
