#include "qasir/eval.hpp"

#include "qasir/errors.hpp"

#include <iomanip>
#include <unordered_map>

namespace qasir {

GroundTruth ground_truth(std::span<const QueryEmbedding> queries) {
    GroundTruth truth;
    for (const auto& q : queries) {
        truth.emplace(q.query_id, q.video_id);
    }
    return truth;
}

std::size_t positive_rank(const QueryRanking& ranking, const std::string& positive) {
    for (std::size_t i = 0; i < ranking.ranking.size(); ++i) {
        if (ranking.ranking[i].video_id == positive) {
            return i + 1;
        }
    }
    return 0;
}

namespace {

std::unordered_map<std::string, const QueryRanking*> by_query(std::span<const QueryRanking> rankings) {
    std::unordered_map<std::string, const QueryRanking*> m;
    for (const auto& r : rankings) {
        m.emplace(r.query_id, &r);
    }
    return m;
}

// Positive ranks for a subset of truth queries (all when ids is null).
std::vector<std::size_t> ranks_for(const std::unordered_map<std::string, const QueryRanking*>& lookup,
                                   const GroundTruth& truth, const std::vector<std::string>* ids) {
    std::vector<std::size_t> ranks;
    auto add = [&](const std::string& qid, const std::string& vid) {
        const auto it = lookup.find(qid);
        if (it == lookup.end()) {
            throw InvalidInput("query " + qid + " has no ranking");
        }
        ranks.push_back(positive_rank(*it->second, vid));
    };
    if (ids) {
        for (const auto& qid : *ids) {
            const auto t = truth.find(qid);
            if (t == truth.end()) {
                throw InvalidInput("query " + qid + " has no ground truth");
            }
            add(qid, t->second);
        }
    } else {
        for (const auto& [qid, vid] : truth) {
            add(qid, vid);
        }
    }
    return ranks;
}

RecallSet recalls(const std::vector<std::size_t>& ranks) {
    RecallSet s;
    s.num_queries = ranks.size();
    if (ranks.empty()) {
        return s;
    }
    for (std::size_t c = 0; c < kRecallCutoffs.size(); ++c) {
        std::size_t hits = 0;
        for (const auto r : ranks) {
            hits += (r >= 1 && r <= kRecallCutoffs[c]) ? 1 : 0;
        }
        s.recall[c] = 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
        s.sum_r += s.recall[c];
    }
    return s;
}

} // namespace

double recall_at_k(std::span<const QueryRanking> rankings, const GroundTruth& truth, std::size_t k) {
    if (truth.empty()) {
        throw InvalidInput("no queries to evaluate");
    }
    const auto ranks = ranks_for(by_query(rankings), truth, nullptr);
    std::size_t hits = 0;
    for (const auto r : ranks) {
        hits += (r >= 1 && r <= k) ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::string to_string(MvGroup g) {
    switch (g) {
    case MvGroup::short_moment:
        return "short";
    case MvGroup::middle_moment:
        return "middle";
    case MvGroup::long_moment:
        return "long";
    }
    return "?";
}

MvGroup mv_group(double ratio) {
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw InvalidInput("moment ratio must lie in (0, 1], got " + std::to_string(ratio));
    }
    if (ratio <= 0.2) {
        return MvGroup::short_moment;
    }
    if (ratio <= 0.4) {
        return MvGroup::middle_moment;
    }
    return MvGroup::long_moment;
}

std::map<MvGroup, std::vector<std::string>> mv_group(std::span<const MomentAnnotation> annotations) {
    std::map<MvGroup, std::vector<std::string>> groups{
        {MvGroup::short_moment, {}}, {MvGroup::middle_moment, {}}, {MvGroup::long_moment, {}}};
    for (const auto& a : annotations) {
        groups[mv_group(a.ratio)].push_back(a.query_id);
    }
    return groups;
}

std::vector<MomentAnnotation> moment_annotations(std::span<const QueryEmbedding> queries,
                                                 const std::map<std::string, double>& durations) {
    std::vector<MomentAnnotation> out;
    for (const auto& q : queries) {
        if (!q.moment_span) {
            continue;
        }
        const auto it = durations.find(q.video_id);
        if (it == durations.end()) {
            throw InvalidInput("no duration for video " + q.video_id);
        }
        if (!(it->second > 0.0)) {
            throw InvalidInput("video " + q.video_id + " has a non-positive duration");
        }
        out.push_back({q.query_id, q.moment_span->length() / it->second});
    }
    return out;
}

double EvalReport::recall_at(std::size_t k) const {
    for (std::size_t c = 0; c < kRecallCutoffs.size(); ++c) {
        if (kRecallCutoffs[c] == k) {
            return overall.recall[c];
        }
    }
    throw InvalidInput("recall is reported at K = 1, 5, 10, 100 only");
}

EvalReport report(std::span<const QueryRanking> rankings, const GroundTruth& truth,
                  std::span<const MomentAnnotation> annotations) {
    if (truth.empty()) {
        throw InvalidInput("no queries to evaluate");
    }
    const auto lookup = by_query(rankings);
    EvalReport r;
    r.overall = recalls(ranks_for(lookup, truth, nullptr));
    if (!annotations.empty()) {
        for (const auto& [group, ids] : mv_group(annotations)) {
            r.grouped[group] = recalls(ranks_for(lookup, truth, &ids));
        }
    }
    return r;
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
    out << "group,queries,R@1,R@5,R@10,R@100,sumR\n" << std::fixed << std::setprecision(4);
    auto row = [&](const std::string& name, const RecallSet& s) {
        out << name << ',' << s.num_queries;
        for (const auto v : s.recall) {
            out << ',' << v;
        }
        out << ',' << s.sum_r << '\n';
    };
    row("all", r.overall);
    for (const auto& [g, s] : r.grouped) {
        row(to_string(g), s);
    }
    out.unsetf(std::ios::floatfield);
}

void write_report_table(std::ostream& out, const EvalReport& r) {
    out << std::left << std::setw(8) << "group" << std::right << std::setw(9) << "queries" << std::setw(8) << "R@1"
        << std::setw(8) << "R@5" << std::setw(8) << "R@10" << std::setw(8) << "R@100" << std::setw(8) << "sumR"
        << '\n'
        << std::fixed << std::setprecision(1);
    auto row = [&](const std::string& name, const RecallSet& s) {
        out << std::left << std::setw(8) << name << std::right << std::setw(9) << s.num_queries;
        for (const auto v : s.recall) {
            out << std::setw(8) << v;
        }
        out << std::setw(8) << s.sum_r << '\n';
    };
    row("all", r.overall);
    for (const auto& [g, s] : r.grouped) {
        row(to_string(g), s);
    }
    out.unsetf(std::ios::floatfield);
}

} // namespace qasir
