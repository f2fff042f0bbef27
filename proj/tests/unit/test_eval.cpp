#include "qasir/errors.hpp"
#include "qasir/eval.hpp"
#include "qasir/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace qasir;

namespace {

QueryRanking ranking_of(const std::string& qid, std::vector<std::string> order) {
    QueryRanking r{qid, {}};
    double s = 1.0;
    for (auto& id : order) {
        r.ranking.push_back({std::move(id), s});
        s -= 0.001;
    }
    return r;
}

} // namespace

TEST_CASE("recall at k") {
    const GroundTruth truth{{"q", "a"}};
    const std::vector<QueryRanking> first{ranking_of("q", {"a", "b"})};
    CHECK(recall_at_k(first, truth, 1) == 100.0);
    const std::vector<QueryRanking> second{ranking_of("q", {"b", "a", "c"})};
    CHECK(recall_at_k(second, truth, 1) == 0.0);
    CHECK(recall_at_k(second, truth, 5) == 100.0);
    CHECK(positive_rank(second[0], "a") == 2);
    CHECK(positive_rank(second[0], "zz") == 0);

    const GroundTruth two{{"q", "a"}, {"r", "b"}};
    CHECK_THROWS_AS(recall_at_k(first, two, 1), InvalidInput);

    // Corpus below 100 videos: R@100 is 100 whenever the positive is present.
    std::vector<std::string> small;
    for (int i = 0; i < 30; ++i) {
        small.push_back("v" + std::to_string(i));
    }
    auto r = ranking_of("q", small);
    std::rotate(r.ranking.begin(), r.ranking.begin() + 1, r.ranking.end());
    const GroundTruth t0{{"q", "v0"}};
    const std::vector<QueryRanking> rs{r};
    CHECK(recall_at_k(rs, t0, 100) == 100.0);
    CHECK(recall_at_k(rs, t0, 10) == 0.0);
}

TEST_CASE("moment groups") {
    CHECK(mv_group(0.2) == MvGroup::short_moment);
    CHECK(mv_group(0.2000001) == MvGroup::middle_moment);
    CHECK(mv_group(0.4) == MvGroup::middle_moment);
    CHECK(mv_group(0.41) == MvGroup::long_moment);
    CHECK(mv_group(1.0) == MvGroup::long_moment);
    CHECK(mv_group(1e-9) == MvGroup::short_moment);
    CHECK_THROWS_AS(mv_group(0.0), InvalidInput);
    CHECK_THROWS_AS(mv_group(-0.1), InvalidInput);
    CHECK_THROWS_AS(mv_group(1.01), InvalidInput);
    CHECK(to_string(MvGroup::middle_moment) == "middle");

    const std::vector<MomentAnnotation> ann{{"a", 0.1}, {"b", 0.3}, {"c", 0.9}, {"d", 0.2}};
    const auto g = mv_group(ann);
    CHECK(g.at(MvGroup::short_moment) == std::vector<std::string>{"a", "d"});
    CHECK(g.at(MvGroup::middle_moment) == std::vector<std::string>{"b"});
    CHECK(g.at(MvGroup::long_moment) == std::vector<std::string>{"c"});

    std::vector<QueryEmbedding> qs{{"q1", "v", Eigen::VectorXd::Ones(2), MomentSpan{1.0, 3.0}},
                                   {"q2", "v", Eigen::VectorXd::Ones(2), std::nullopt}};
    const auto ma = moment_annotations(qs, {{"v", 10.0}});
    REQUIRE(ma.size() == 1);
    CHECK(ma[0].ratio == doctest::Approx(0.2));
    CHECK_THROWS_AS(moment_annotations(qs, {}), InvalidInput);
}

TEST_CASE("report on a perfect retriever") {
    SynthConfig cfg;
    cfg.seed = 3;
    cfg.num_videos = 40;
    cfg.noise_sigma = 0.0;
    const auto corpus = generate(cfg);
    const RankingIndex index(corpus.store.videos(), std::make_shared<PoolingScorer>());
    const auto rankings = rank_all(corpus.store.queries(), index, 1);
    const auto truth = ground_truth(corpus.store.queries());
    const auto rep = report(rankings, truth);
    CHECK(rep.overall.sum_r == 400.0);
    CHECK(rep.overall.num_queries == 40);
    CHECK(rep.recall_at(5) == 100.0);
    CHECK_THROWS_AS(rep.recall_at(3), InvalidInput);

    std::ostringstream csv, table;
    write_report_csv(csv, rep);
    write_report_table(table, rep);
    CHECK(csv.str().rfind("group,queries,R@1,R@5,R@10,R@100,sumR", 0) == 0);
    CHECK(table.str().find("400") != std::string::npos);
}

TEST_CASE("random scorer matches the binomial expectation") {
    std::mt19937_64 rng(11);
    const std::size_t videos = 1000, queries = 3000;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < videos; ++i) {
        ids.push_back("v" + std::to_string(i));
    }
    std::vector<QueryRanking> rankings;
    GroundTruth truth;
    for (std::size_t q = 0; q < queries; ++q) {
        auto order = ids;
        std::shuffle(order.begin(), order.end(), rng);
        const std::string qid = "q" + std::to_string(q);
        truth[qid] = ids[q % videos];
        rankings.push_back(ranking_of(qid, std::move(order)));
    }
    double prev = 0.0;
    for (std::size_t k : kRecallCutoffs) {
        const double p = static_cast<double>(k) / videos;
        const double sigma = 100.0 * std::sqrt(p * (1 - p) / queries);
        const double r = recall_at_k(rankings, truth, k);
        CHECK(std::abs(r - 100.0 * p) <= 3.0 * sigma + 1e-9);
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("grouped recalls recombine into the overall recall") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> ids;
    for (int i = 0; i < 150; ++i) {
        ids.push_back("v" + std::to_string(i));
    }
    std::vector<QueryRanking> rankings;
    GroundTruth truth;
    std::vector<MomentAnnotation> ann;
    for (int q = 0; q < 400; ++q) {
        auto order = ids;
        std::shuffle(order.begin(), order.begin() + 20, rng);
        std::shuffle(order.begin(), order.end() - 100, rng);
        const std::string qid = "q" + std::to_string(q);
        truth[qid] = ids[static_cast<std::size_t>(q) % 30];
        rankings.push_back(ranking_of(qid, std::move(order)));
        const double ratio = q % 10 == 0 ? std::array<double, 3>{0.2, 0.4, 1.0}[static_cast<std::size_t>(q / 10) % 3]
                                         : std::max(1e-6, u(rng));
        ann.push_back({qid, ratio});
    }
    const auto rep = report(rankings, truth, ann);
    REQUIRE(rep.grouped.size() == 3);
    std::size_t total = 0;
    for (const auto& [g, set] : rep.grouped) {
        total += set.num_queries;
    }
    CHECK(total == 400);
    for (std::size_t i = 0; i < kRecallCutoffs.size(); ++i) {
        double weighted = 0.0;
        for (const auto& [g, set] : rep.grouped) {
            weighted += set.recall[i] * static_cast<double>(set.num_queries);
        }
        CHECK(std::abs(weighted / 400.0 - rep.overall.recall[i]) <= 1e-9);
        if (i > 0) {
            CHECK(rep.overall.recall[i] >= rep.overall.recall[i - 1]);
        }
    }
    double sum = 0.0;
    for (double r : rep.overall.recall) {
        sum += r;
    }
    CHECK(rep.overall.sum_r == doctest::Approx(sum));
}
