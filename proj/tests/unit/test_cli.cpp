#include "../../tools/cli.hpp"

#include "qasir/embedding_store.hpp"
#include "qasir/png_io.hpp"
#include "qasir/super_image.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace qasir;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "qasir");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qasir_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("help and usage errors") {
    CHECK(invoke({"--help"}).code == cli::kOk);
    CHECK(invoke({"cost", "--help"}).code == cli::kOk);
    CHECK(invoke({"cost", "--no-such-flag"}).code == cli::kUsageError);
    CHECK(invoke({}).code == cli::kUsageError);
    CHECK(invoke({"frobnicate"}).code == cli::kUsageError);
    CHECK(invoke({"cost", "--grid", "two"}).code == cli::kValidationError);
}

TEST_CASE("cost command") {
    const auto r = invoke({"cost", "--backbone", "clip-b32", "--grid", "1", "--avg-frames", "60.3"});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("5.4x10^2") != std::string::npos);

    const auto csv = invoke({"cost", "--sweep", "--dataset", "activitynet", "--format", "csv"});
    CHECK(csv.code == cli::kOk);
    CHECK(csv.out.find("clip-l14,2,") != std::string::npos);

    CHECK(invoke({"cost", "--backbone", "clip-h14"}).code == cli::kValidationError);
    CHECK(invoke({"cost", "--frames-file", "/nonexistent/qasir/frames.txt"}).code == cli::kIoError);

    const auto dir = scratch("config");
    const auto cfg = dir / "cost.ini";
    std::ofstream(cfg) << "[cost]\nbackbone=clip-l14\ngrid=2\navg-frames=15.5\n";
    const auto from_file = invoke({"--config", cfg.string(), "cost"});
    CHECK(from_file.code == cli::kOk);
    CHECK(from_file.out.find("2.5x10^3") != std::string::npos);
    const auto overridden = invoke({"--config", cfg.string(), "cost", "--backbone", "clip-b32", "--avg-frames", "60.3",
                                    "--grid", "1"});
    CHECK(overridden.out.find("5.4x10^2") != std::string::npos);

    const auto hyb = invoke({"hybrid", "--report", "cost", "--dataset", "activitynet", "-R", "400"});
    CHECK(hyb.code == cli::kOk);
    CHECK(hyb.out.find("2.7x10^2") != std::string::npos);
    CHECK(invoke({"hybrid", "--report", "cost", "--dataset", "charades"}).code == cli::kValidationError);
    fs::remove_all(dir);
}

TEST_CASE("synth, retrieve, eval and hybrid") {
    const auto dir = scratch("pipeline");
    const auto emb = (dir / "c.qemb").string();
    const auto man = (dir / "c.json").string();
    REQUIRE(invoke({"synth", "--seed", "3", "--videos", "40", "--dim", "32", "--k-min", "4", "--k-max", "8", "--out",
                    emb, "--manifest-out", man})
                .code == cli::kOk);
    const auto first = slurp(emb);
    REQUIRE(invoke({"synth", "--seed", "3", "--videos", "40", "--dim", "32", "--k-min", "4", "--k-max", "8", "--out",
                    emb})
                .code == cli::kOk);
    CHECK(slurp(emb) == first);

    const auto ingest = invoke({"ingest", emb});
    CHECK(ingest.code == cli::kOk);
    CHECK(invoke({"ingest", (dir / "missing.qemb").string()}).code == cli::kIoError);
    std::ofstream(dir / "junk.qemb") << "NOPE";
    CHECK(invoke({"ingest", (dir / "junk.qemb").string()}).code == cli::kValidationError);

    const auto ret = invoke({"retrieve", "--embeddings", emb, "--top", "0"});
    REQUIRE(ret.code == cli::kOk);
    CHECK(ret.out.rfind("query_id,rank,video_id,score\n", 0) == 0);
    CHECK(ret.out.find("\nv0q0,1,v0,") != std::string::npos);
    const auto threaded = invoke({"retrieve", "--embeddings", emb, "--top", "0", "--threads", "3"});
    CHECK(threaded.out == ret.out);

    const auto one = invoke({"retrieve", "--embeddings", emb, "--query", "v7q0", "--top", "3"});
    CHECK(one.code == cli::kOk);
    CHECK(std::count(one.out.begin(), one.out.end(), '\n') == 4);
    CHECK(invoke({"retrieve", "--embeddings", emb, "--pool", "median"}).code == cli::kValidationError);

    // Re-ranking every candidate reproduces the re-ranking model alone.
    const auto all = invoke({"hybrid", "--high", emb, "--high-pool", "mean", "--low", emb, "-R", "40", "--top", "0"});
    REQUIRE(all.code == cli::kOk);
    CHECK(all.out == ret.out);
    const auto screened = invoke({"hybrid", "--high", emb, "--high-pool", "mean", "--low", emb, "-R", "5", "--top",
                                  "0", "--stages"});
    CHECK(screened.code == cli::kOk);
    CHECK(screened.out.find("screened") != std::string::npos);

    const auto ev = invoke({"eval", "--embeddings", emb, "--manifest", man, "--mv-groups", "--format", "csv"});
    CHECK(ev.code == cli::kOk);
    CHECK(ev.out.rfind("group,queries,R@1,R@5,R@10,R@100,sumR", 0) == 0);
    CHECK(ev.out.find("\nall,40,") != std::string::npos);

    const auto rankings = dir / "rank.csv";
    REQUIRE(invoke({"retrieve", "--embeddings", emb, "--out", rankings.string(), "--top", "0"}).code == cli::kOk);
    const auto from_csv = invoke({"eval", "--embeddings", emb, "--rankings", rankings.string(), "--format", "csv"});
    const auto direct = invoke({"eval", "--embeddings", emb, "--format", "csv"});
    CHECK(from_csv.out == direct.out);
    fs::remove_all(dir);
}

TEST_CASE("train then retrieve with the fine-tuned head") {
    const auto dir = scratch("train");
    const auto emb = (dir / "t.qemb").string();
    const auto ckpt = (dir / "head.qckpt").string();
    const auto losses = (dir / "loss.csv").string();
    REQUIRE(invoke({"synth", "--seed", "4", "--videos", "32", "--dim", "16", "--k-min", "4", "--k-max", "4", "--out",
                    emb})
                .code == cli::kOk);
    const auto tr = invoke({"train", "--embeddings", emb, "--batch", "8", "--epochs", "2", "--lr", "1e-3", "--hidden",
                            "16", "--heads", "2", "--out", ckpt, "--loss-csv", losses});
    REQUIRE(tr.code == cli::kOk);
    CHECK(tr.out.find("steps 8") != std::string::npos);
    CHECK(fs::exists(ckpt));
    CHECK(slurp(losses).rfind("step,loss\n", 0) == 0);

    const auto ret = invoke({"retrieve", "--embeddings", emb, "--mode", "finetuned", "--checkpoint", ckpt});
    CHECK(ret.code == cli::kOk);
    CHECK(invoke({"retrieve", "--embeddings", emb, "--mode", "finetuned"}).code == cli::kValidationError);
    CHECK(invoke({"retrieve", "--embeddings", emb, "--mode", "finetuned", "--checkpoint", (dir / "none").string()})
              .code == cli::kIoError);
    CHECK(invoke({"train", "--embeddings", emb, "--batch", "64"}).code == cli::kValidationError);
    fs::remove_all(dir);
}

TEST_CASE("tile command") {
    const auto dir = scratch("tile");
    std::mt19937_64 rng(1);
    nlohmann::json doc;
    doc["dataset"] = "toy";
    doc["videos"] = nlohmann::json::array();
    std::vector<Frame> frames;
    nlohmann::json paths = nlohmann::json::array();
    for (int i = 0; i < 10; ++i) {
        std::vector<std::uint8_t> px(8 * 6 * 3);
        for (auto& p : px) {
            p = static_cast<std::uint8_t>(rng());
        }
        frames.emplace_back(8, 6, px);
        const auto name = "f" + std::to_string(i) + ".png";
        write_png(dir / name, frames.back());
        paths.push_back(name);
    }
    doc["videos"].push_back({{"video_id", "clip"}, {"duration_sec", 10.0}, {"frames", paths}});
    doc["queries"] = nlohmann::json::array();
    std::ofstream(dir / "m.json") << doc.dump();

    const auto out = dir / "si";
    const auto r = invoke({"tile", "--manifest", (dir / "m.json").string(), "--out", out.string(), "--grid", "2",
                           "--cell-px", "4"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("clip,10,3") != std::string::npos);
    const auto expect = tile_sequential(frames, 2, 4);
    for (int k = 0; k < 3; ++k) {
        CHECK(read_png(out / ("clip_si" + std::to_string(k) + ".png")) == expect.images[static_cast<std::size_t>(k)].canvas);
    }

    const auto half = invoke({"tile", "--manifest", (dir / "m.json").string(), "--out", out.string(), "--grid", "2",
                              "--cell-px", "4", "--fps", "1/2"});
    CHECK(half.out.find("clip,5,2") != std::string::npos);

    const auto sifar = invoke({"tile", "--manifest", (dir / "m.json").string(), "--out", (dir / "sf").string(),
                               "--sifar", "7", "--cell-px", "4"});
    CHECK(sifar.code == cli::kOk);
    CHECK(read_png(dir / "sf" / "clip_si0.png").width == 12);

    fs::remove(dir / "f3.png");
    CHECK(invoke({"tile", "--manifest", (dir / "m.json").string(), "--out", out.string()}).code == cli::kIoError);
    CHECK(invoke({"tile", "--manifest", (dir / "m.json").string(), "--grid", "0"}).code == cli::kValidationError);
    fs::remove_all(dir);
}
