#include "cli.hpp"

#include "qasir/cost_model.hpp"
#include "qasir/embedding_store.hpp"
#include "qasir/errors.hpp"
#include "qasir/eval.hpp"
#include "qasir/finetune.hpp"
#include "qasir/hybrid.hpp"
#include "qasir/manifest.hpp"
#include "qasir/png_io.hpp"
#include "qasir/scoring.hpp"
#include "qasir/super_image.hpp"
#include "qasir/synth.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace qasir::cli {

namespace {

std::string fmt_score(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Writes to `path` when given, else to the default stream.
void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& fn) {
    if (path.empty()) {
        fn(fallback);
        return;
    }
    std::ofstream file(path);
    if (!file) {
        throw IoError("cannot write " + path);
    }
    fn(file);
    if (!file) {
        throw IoError("write failed: " + path);
    }
}

FillOrder parse_order(const std::string& s) {
    if (s == "column" || s == "column-major") {
        return FillOrder::column_major;
    }
    if (s == "row" || s == "row-major") {
        return FillOrder::row_major;
    }
    throw ConfigError("fill order must be column or row, got " + s);
}

Rational parse_rational(const std::string& s) {
    Rational r;
    const auto slash = s.find('/');
    try {
        std::size_t used = 0;
        r.num = std::stoll(s.substr(0, slash), &used);
        if (used != (slash == std::string::npos ? s.size() : slash)) {
            throw std::invalid_argument(s);
        }
        if (slash != std::string::npos) {
            r.den = std::stoll(s.substr(slash + 1), &used);
            if (used != s.size() - slash - 1) {
                throw std::invalid_argument(s);
            }
        }
    } catch (const std::logic_error&) {
        throw ConfigError("frame rate must look like 2 or 1/2, got " + s);
    }
    if (r.num <= 0 || r.den <= 0) {
        throw ConfigError("frame rate must be positive");
    }
    return r;
}

EmbeddingFormat parse_format(const std::string& s) {
    if (s == "binary" || s == "qemb") {
        return EmbeddingFormat::binary;
    }
    if (s == "jsonl") {
        return EmbeddingFormat::jsonl;
    }
    throw ConfigError("embedding format must be binary or jsonl, got " + s);
}

// Options shared by every command that scores embeddings.
struct ModelFlags {
    std::string mode = "zero-shot";
    std::string checkpoint;
    std::string pool = "attn";
    double temperature = 1.0;
    bool raw = false;

    void add(CLI::App* cmd, const std::string& prefix = "") {
        cmd->add_option("--" + prefix + "mode", mode, "zero-shot or finetuned")->capture_default_str();
        cmd->add_option("--" + prefix + "checkpoint", checkpoint, "fine-tuned head (QCKPT)");
        cmd->add_option("--" + prefix + "pool", pool, "attn, mean or max")->capture_default_str();
        if (prefix.empty()) {
            cmd->add_option("--temperature", temperature, "attention softmax temperature (zero-shot)")
                ->capture_default_str();
            cmd->add_flag("--raw", raw, "keep embeddings unnormalized");
        }
    }

    std::shared_ptr<const Scorer> scorer() const {
        const Pooling p = parse_pooling(pool);
        if (mode == "zero-shot") {
            return std::make_shared<PoolingScorer>(p, temperature);
        }
        if (mode == "finetuned") {
            if (checkpoint.empty()) {
                throw ConfigError("finetuned mode needs --checkpoint");
            }
            return std::make_shared<FineTunedScorer>(load_checkpoint(checkpoint), p);
        }
        throw ConfigError("mode must be zero-shot or finetuned, got " + mode);
    }
};

EmbeddingStore load_store(const std::string& path, bool raw) {
    if (path.empty()) {
        throw ConfigError("an embeddings file is required");
    }
    return ingest(path, LoadOptions{!raw});
}

void write_rankings(std::ostream& out, std::span<const QueryRanking> rankings, std::size_t top) {
    out << "query_id,rank,video_id,score\n";
    for (const auto& q : rankings) {
        const std::size_t n = top == 0 ? q.ranking.size() : std::min(top, q.ranking.size());
        for (std::size_t i = 0; i < n; ++i) {
            out << q.query_id << ',' << i + 1 << ',' << q.ranking[i].video_id << ','
                << fmt_score(q.ranking[i].score) << '\n';
        }
    }
}

std::vector<QueryRanking> read_rankings(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open rankings " + path);
    }
    std::vector<QueryRanking> out;
    std::map<std::string, std::size_t> slot;
    std::string line;
    std::getline(in, line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string qid, rank, vid, score;
        if (!std::getline(ss, qid, ',') || !std::getline(ss, rank, ',') || !std::getline(ss, vid, ',') ||
            !std::getline(ss, score, ',')) {
            throw InvalidInput("malformed rankings line " + std::to_string(line_no));
        }
        auto [it, fresh] = slot.emplace(qid, out.size());
        if (fresh) {
            out.push_back({qid, {}});
        }
        auto& ranking = out[it->second].ranking;
        if (std::stoul(rank) != ranking.size() + 1) {
            throw InvalidInput("rankings for " + qid + " are not in rank order at line " + std::to_string(line_no));
        }
        ranking.push_back({vid, std::stod(score)});
    }
    return out;
}

std::vector<MomentAnnotation> annotations_for(const EmbeddingStore& store, const std::string& manifest_path) {
    if (manifest_path.empty()) {
        throw ConfigError("--mv-groups needs --manifest for video durations");
    }
    const Manifest m = load_manifest(manifest_path, false);
    return moment_annotations(store.queries(), m.durations());
}

void print_report(std::ostream& out, const EvalReport& r, const std::string& format) {
    if (format == "csv") {
        write_report_csv(out, r);
    } else if (format == "table") {
        write_report_table(out, r);
    } else {
        throw ConfigError("report format must be table or csv, got " + format);
    }
}

// ---- tile ----

struct TileFlags {
    std::string manifest;
    std::string out_dir = ".";
    int grid = 2;
    int cell_px = 112;
    std::string fps;
    std::size_t frames = 0;
    int sifar = 0;
    std::string order = "column";
};

int cmd_tile(const TileFlags& f, std::ostream& out) {
    if (f.grid < 1 || f.cell_px < 1) {
        throw InvalidInput("--grid and --cell-px must be positive");
    }
    const Manifest m = load_manifest(f.manifest, true);
    const FillOrder order = parse_order(f.order);
    std::filesystem::create_directories(f.out_dir);
    out << "video_id,frames,super_images\n";
    for (const auto& v : m.videos) {
        if (v.frames.empty()) {
            throw InvalidInput("video " + v.video_id + " lists no frames");
        }
        std::vector<Frame> frames;
        for (const auto& p : v.frames) {
            frames.push_back(read_png(p));
        }
        if (f.sifar > 0) {
            const SuperImage si = compose_sifar(frames, f.sifar, f.cell_px, order);
            write_png(std::filesystem::path(f.out_dir) / (v.video_id + "_si0.png"), si.canvas);
            out << v.video_id << ',' << si.source_indices.size() << ",1\n";
            continue;
        }
        std::size_t target = frames.size();
        Rational rate{static_cast<std::int64_t>(frames.size()),
                      std::max<std::int64_t>(1, std::llround(v.duration_sec))};
        if (!f.fps.empty()) {
            rate = parse_rational(f.fps);
            if (!(v.duration_sec > 0.0)) {
                throw InvalidInput("--fps needs a positive duration for " + v.video_id);
            }
            target = static_cast<std::size_t>(std::max(1.0, std::round(v.duration_sec * rate.value())));
        }
        if (f.frames > 0) {
            target = f.frames;
        }
        const auto indices = sample_uniform_indices(frames.size(), target);
        std::vector<Frame> picked;
        for (const auto i : indices) {
            picked.push_back(frames[i]);
        }
        const auto seq = tile_sequential(picked, indices, f.grid, f.cell_px, order, v.video_id, rate);
        for (std::size_t k = 0; k < seq.images.size(); ++k) {
            write_png(std::filesystem::path(f.out_dir) / (v.video_id + "_si" + std::to_string(k) + ".png"),
                      seq.images[k].canvas);
        }
        out << v.video_id << ',' << seq.frame_count() << ',' << seq.images.size() << '\n';
    }
    return kOk;
}

// ---- ingest ----

struct IngestFlags {
    std::vector<std::string> inputs;
    std::string out;
    std::string format = "binary";
    bool raw = false;
};

int cmd_ingest(const IngestFlags& f, std::ostream& out) {
    EmbeddingStore merged;
    bool first = true;
    for (const auto& path : f.inputs) {
        EmbeddingStore s = ingest(path, LoadOptions{!f.raw});
        out << path << ": " << s.videos().size() << " videos, " << s.queries().size() << " queries, d=" << s.dim()
            << '\n';
        merged = first ? std::move(s) : merged.merged(s);
        first = false;
    }
    if (f.inputs.size() > 1) {
        out << "merged: " << merged.videos().size() << " videos, " << merged.queries().size() << " queries, d="
            << merged.dim() << '\n';
    }
    if (!f.out.empty()) {
        write_embeddings(f.out, merged, parse_format(f.format));
    }
    return kOk;
}

// ---- retrieve ----

struct RetrieveFlags {
    std::string embeddings;
    ModelFlags model;
    std::size_t top = 100;
    std::string query;
    unsigned threads = 0;
    std::string out;
};

std::vector<QueryRanking> rank_store(const EmbeddingStore& store, const ModelFlags& model, unsigned threads,
                                     const std::string& only_query = {}) {
    const RankingIndex index(store.videos(), model.scorer());
    std::vector<QueryEmbedding> queries(store.queries().begin(), store.queries().end());
    if (!only_query.empty()) {
        const auto* q = store.find_query(only_query);
        if (!q) {
            throw InvalidInput("unknown query " + only_query);
        }
        queries = {*q};
    }
    return rank_all(queries, index, threads);
}

int cmd_retrieve(const RetrieveFlags& f, std::ostream& out) {
    const EmbeddingStore store = load_store(f.embeddings, f.model.raw);
    const auto rankings = rank_store(store, f.model, f.threads, f.query);
    emit(f.out, out, [&](std::ostream& o) { write_rankings(o, rankings, f.top); });
    return kOk;
}

// ---- train ----

struct TrainFlags {
    std::string embeddings;
    TrainConfig train;
    ModelConfig model;
    std::string loss = "infonce";
    double tau = 0.07;
    bool no_vision = false;
    bool no_text = false;
    bool no_temporal = false;
    std::string out = "head.qckpt";
    std::string loss_csv;
};

int cmd_train(TrainFlags f, std::ostream& out) {
    const EmbeddingStore store = load_store(f.embeddings, false);
    f.train.loss.mode = parse_loss_mode(f.loss);
    f.train.loss.temperature = f.tau;
    f.model.dim = store.dim();
    f.model.use = {!f.no_vision, !f.no_text, !f.no_temporal};
    const FineTuneParams init = init_params(f.model, f.train.seed);
    const TrainResult result = train(store, init, f.train);
    save_checkpoint(f.out, result.params);
    if (!f.loss_csv.empty()) {
        write_loss_csv(f.loss_csv, result.loss_history);
    }
    out << "steps " << result.loss_history.size();
    if (!result.loss_history.empty()) {
        out << ", loss " << fmt_score(result.loss_history.front()) << " -> " << fmt_score(result.loss_history.back());
    }
    out << "\ncheckpoint " << f.out << '\n';
    return kOk;
}

// ---- eval ----

struct EvalFlags {
    std::string embeddings;
    ModelFlags model;
    std::string rankings;
    std::string manifest;
    bool mv_groups = false;
    std::string format = "table";
    unsigned threads = 0;
    std::string out;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
    const EmbeddingStore store = load_store(f.embeddings, f.model.raw);
    const auto rankings = f.rankings.empty() ? rank_store(store, f.model, f.threads) : read_rankings(f.rankings);
    std::vector<MomentAnnotation> notes;
    if (f.mv_groups) {
        notes = annotations_for(store, f.manifest);
    }
    const EvalReport r = report(rankings, ground_truth(store.queries()), notes);
    emit(f.out, out, [&](std::ostream& o) { print_report(o, r, f.format); });
    return kOk;
}

// ---- cost ----

struct CostFlags {
    std::vector<std::string> backbones{"clip-b32"};
    std::vector<int> grids{1};
    double avg_frames = 0.0;
    std::string dataset = "activitynet";
    std::string frames_file;
    std::string head = "zero-shot";
    std::string format = "table";
    bool sweep = false;
    std::string out;
};

HeadDescription head_for(const std::string& kind) {
    HeadDescription h;
    if (kind == "finetuned") {
        h.vision_adapter = h.text_adapter = h.temporal_encoder = true;
    } else if (kind != "zero-shot") {
        throw ConfigError("head must be zero-shot or finetuned, got " + kind);
    }
    return h;
}

int cmd_cost(const CostFlags& f, std::ostream& out) {
    std::vector<std::string> backbones = f.backbones;
    std::vector<int> grids = f.grids;
    if (f.sweep) {
        backbones = {"clip-b32", "clip-l14", "clip-l14-336"};
        grids = {1, 2, 3, 4, 5, 6};
    }
    std::vector<std::size_t> per_video;
    if (!f.frames_file.empty()) {
        std::ifstream in(f.frames_file);
        if (!in) {
            throw IoError("cannot open " + f.frames_file);
        }
        std::size_t n = 0;
        while (in >> n) {
            per_video.push_back(n);
        }
        if (!in.eof()) {
            throw InvalidInput(f.frames_file + " must hold whitespace-separated frame counts");
        }
    }
    std::vector<CostRow> rows;
    for (const auto& b : backbones) {
        const auto& profile = find_profile(b);
        for (const int g : grids) {
            HeadDescription head = head_for(f.head);
            head.d = profile.d;
            CostRow row{b, g, 0.0, {}};
            if (!per_video.empty()) {
                double images = 0.0;
                for (const auto l : per_video) {
                    images += static_cast<double>(images_per_video(l, g));
                }
                row.images = images / static_cast<double>(per_video.size());
                head.images = row.images;
                row.cost = video_text_gflops_exact(profile, per_video, g, head_flops(head));
            } else {
                row.images = f.avg_frames > 0.0 ? f.avg_frames : dataset_stats(f.dataset).images(g);
                head.images = row.images;
                row.cost = video_text_gflops(profile, row.images, head_flops(head));
            }
            rows.push_back(row);
        }
    }
    emit(f.out, out, [&](std::ostream& o) {
        if (f.format == "csv") {
            write_cost_csv(o, rows);
        } else if (f.format == "table") {
            write_cost_table(o, rows);
        } else {
            throw ConfigError("cost format must be table or csv, got " + f.format);
        }
    });
    return kOk;
}

// ---- hybrid ----

struct HybridFlags {
    std::string high_embeddings, low_embeddings;
    ModelFlags high_model, low_model;
    std::string high_backbone = "clip-b32", low_backbone = "clip-l14";
    int high_grid = 3, low_grid = 2;
    std::size_t R = 400;
    std::string report = "rankings";
    bool stages = false;
    std::size_t top = 100;
    std::string dataset = "activitynet";
    std::size_t corpus_size = 0;
    std::string manifest;
    bool mv_groups = false;
    std::string format = "table";
    unsigned threads = 0;
    std::string out;
};

int cmd_hybrid(const HybridFlags& f, std::ostream& out) {
    HybridConfig config;
    config.R = f.R;
    config.high.name = "high";
    config.high.backbone = f.high_backbone;
    config.high.grid = f.high_grid;
    config.high.head = head_for(f.high_model.mode);
    config.low.name = "low";
    config.low.backbone = f.low_backbone;
    config.low.grid = f.low_grid;
    config.low.head = head_for(f.low_model.mode);
    if (f.R < 1) {
        throw InvalidInput("-R must be at least 1");
    }

    if (f.report == "cost") {
        const HybridCost c = hybrid_cost(config, dataset_stats(f.dataset), f.corpus_size);
        emit(f.out, out, [&](std::ostream& o) {
            if (f.format == "csv") {
                o << "stage,backbone,grid,gflops\n"
                  << "high," << f.high_backbone << ',' << f.high_grid << ',' << fmt_score(c.high.total) << '\n'
                  << "low," << f.low_backbone << ',' << f.low_grid << ',' << fmt_score(c.low.total) << '\n'
                  << "hybrid,,," << fmt_score(c.total) << '\n';
                return;
            }
            auto line = [&](const std::string& stage, const std::string& backbone, const std::string& grid, double g) {
                o << std::left << std::setw(8) << stage << std::setw(14) << backbone << std::setw(6) << grid
                  << std::right << std::setw(12) << std::fixed << std::setprecision(1) << g << "  "
                  << scientific_2sig(g) << '\n';
            };
            o << std::left << std::setw(8) << "stage" << std::setw(14) << "backbone" << std::setw(6) << "grid"
              << std::right << std::setw(12) << "GFLOPs" << '\n';
            const auto grid = [](int n) { return std::to_string(n) + "x" + std::to_string(n); };
            line("high", f.high_backbone, grid(f.high_grid), c.high.total);
            line("low", f.low_backbone, grid(f.low_grid), c.low.total);
            line("hybrid", "R=" + std::to_string(f.R), "", c.total);
            o << "re-ranked share " << std::setprecision(4) << c.rerank_fraction << '\n';
        });
        return kOk;
    }

    const EmbeddingStore high = load_store(f.high_embeddings, false);
    const EmbeddingStore low = load_store(f.low_embeddings, false);
    config.high.index = std::make_shared<RankingIndex>(high.videos(), f.high_model.scorer());
    config.low.index = std::make_shared<RankingIndex>(low.videos(), f.low_model.scorer());

    const auto queries = high.queries();
    std::vector<std::vector<HybridEntry>> results(queries.size());
    for (const auto& q : queries) {
        if (!low.find_query(q.query_id)) {
            throw InvalidInput("query " + q.query_id + " is missing from the low-model embeddings");
        }
    }
    parallel_for(queries.size(), f.threads == 0 ? default_thread_count() : f.threads, [&](std::size_t i) {
        const auto& hq = queries[i];
        const auto* lq = low.find_query(hq.query_id);
        results[i] = hybrid_retrieve(config.high.index->encode_query(hq.vector),
                                     config.low.index->encode_query(lq->vector), config);
    });

    if (f.report == "rankings") {
        emit(f.out, out, [&](std::ostream& o) {
            o << "query_id,rank,video_id,score" << (f.stages ? ",stage" : "") << '\n';
            for (std::size_t i = 0; i < queries.size(); ++i) {
                const auto& r = results[i];
                const std::size_t n = f.top == 0 ? r.size() : std::min(f.top, r.size());
                for (std::size_t k = 0; k < n; ++k) {
                    o << queries[i].query_id << ',' << k + 1 << ',' << r[k].video_id << ',' << fmt_score(r[k].score);
                    if (f.stages) {
                        o << ',' << to_string(r[k].stage);
                    }
                    o << '\n';
                }
            }
        });
        return kOk;
    }
    if (f.report == "eval") {
        std::vector<QueryRanking> rankings;
        for (std::size_t i = 0; i < queries.size(); ++i) {
            QueryRanking qr{queries[i].query_id, {}};
            for (const auto& e : results[i]) {
                qr.ranking.push_back({e.video_id, e.score});
            }
            rankings.push_back(std::move(qr));
        }
        std::vector<MomentAnnotation> notes;
        if (f.mv_groups) {
            notes = annotations_for(high, f.manifest);
        }
        const EvalReport r = report(rankings, ground_truth(queries), notes);
        emit(f.out, out, [&](std::ostream& o) { print_report(o, r, f.format); });
        return kOk;
    }
    throw ConfigError("--report must be rankings, eval or cost, got " + f.report);
}

// ---- synth ----

struct SynthFlags {
    SynthConfig config;
    std::string out = "synthetic.qemb";
    std::string format = "binary";
    std::string manifest_out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
    const SynthCorpus corpus = generate(f.config);
    write_embeddings(f.out, corpus.store, parse_format(f.format));
    if (!f.manifest_out.empty()) {
        save_manifest(f.manifest_out, corpus.manifest);
    }
    out << corpus.store.videos().size() << " videos, " << corpus.store.queries().size() << " queries, d="
        << corpus.store.dim() << " -> " << f.out << '\n';
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Super-image video retrieval: tiling, scoring, fine-tuning, hybrid re-ranking and cost reports",
                 "qasir"};
    app.set_config("--config", "", "INI/TOML file supplying any flag; the command line wins");
    app.require_subcommand(1);

    TileFlags tile;
    auto* c_tile = app.add_subcommand("tile", "Compose frames listed in a manifest into super-image PNGs");
    c_tile->add_option("--manifest", tile.manifest, "manifest JSON")->required();
    c_tile->add_option("--out", tile.out_dir, "output directory")->capture_default_str();
    c_tile->add_option("--grid", tile.grid, "grid edge N")->capture_default_str();
    c_tile->add_option("--cell-px", tile.cell_px, "cell edge in pixels")->capture_default_str();
    c_tile->add_option("--fps", tile.fps, "sampling rate, e.g. 1 or 1/2");
    c_tile->add_option("--frames", tile.frames, "sample exactly this many frames per video");
    c_tile->add_option("--sifar", tile.sifar, "one SIFAR image of M frames instead of sequential tiling");
    c_tile->add_option("--order", tile.order, "column or row")->capture_default_str();

    IngestFlags ing;
    auto* c_ingest = app.add_subcommand("ingest", "Validate and optionally merge embedding files");
    c_ingest->add_option("inputs", ing.inputs, "QEMB or JSONL files")->required();
    c_ingest->add_option("--out", ing.out, "write the merged store here");
    c_ingest->add_option("--format", ing.format, "binary or jsonl")->capture_default_str();
    c_ingest->add_flag("--raw", ing.raw, "keep embeddings unnormalized");

    RetrieveFlags ret;
    auto* c_retrieve = app.add_subcommand("retrieve", "Rank the corpus for every query");
    c_retrieve->add_option("--embeddings", ret.embeddings, "QEMB or JSONL file")->required();
    ret.model.add(c_retrieve);
    c_retrieve->add_option("--top", ret.top, "ranks to print per query (0 = all)")->capture_default_str();
    c_retrieve->add_option("--query", ret.query, "only this query id");
    c_retrieve->add_option("--threads", ret.threads, "worker threads (0 = QASIR_THREADS or all cores)");
    c_retrieve->add_option("--out", ret.out, "CSV destination");

    TrainFlags tr;
    auto* c_train = app.add_subcommand("train", "Fine-tune adapters and the temporal encoder");
    c_train->add_option("--embeddings", tr.embeddings, "training QEMB or JSONL file")->required();
    c_train->add_option("--lr", tr.train.learning_rate, "learning rate")->capture_default_str();
    c_train->add_option("--batch", tr.train.batch_size, "batch size")->capture_default_str();
    c_train->add_option("--epochs", tr.train.epochs, "epochs")->capture_default_str();
    c_train->add_option("--max-steps", tr.train.max_steps, "stop after this many steps (0 = no limit)");
    c_train->add_option("--seed", tr.train.seed, "seed for init and batching")->capture_default_str();
    c_train->add_option("--weight-decay", tr.train.weight_decay, "decoupled weight decay")->capture_default_str();
    c_train->add_option("--loss", tr.loss, "literal or infonce")->capture_default_str();
    c_train->add_option("--tau", tr.tau, "infonce temperature")->capture_default_str();
    c_train->add_option("--hidden", tr.model.hidden, "adapter hidden width")->capture_default_str();
    c_train->add_option("--adapter-depth", tr.model.adapter_depth, "linear layers per adapter")
        ->capture_default_str();
    c_train->add_option("--beta-vision", tr.model.beta_vision, "vision adapter mix")->capture_default_str();
    c_train->add_option("--beta-text", tr.model.beta_text, "text adapter mix")->capture_default_str();
    c_train->add_option("--heads", tr.model.heads, "temporal attention heads")->capture_default_str();
    c_train->add_option("--ff-width", tr.model.ff_width, "temporal feed-forward width (0 = 4d)");
    c_train->add_flag("--no-vision-adapter", tr.no_vision);
    c_train->add_flag("--no-text-adapter", tr.no_text);
    c_train->add_flag("--no-temporal", tr.no_temporal);
    c_train->add_option("--out", tr.out, "checkpoint path")->capture_default_str();
    c_train->add_option("--loss-csv", tr.loss_csv, "write step,loss here");

    EvalFlags ev;
    auto* c_eval = app.add_subcommand("eval", "Recall@{1,5,10,100}, sumR and moment-length groups");
    c_eval->add_option("--embeddings", ev.embeddings, "QEMB or JSONL file")->required();
    ev.model.add(c_eval);
    c_eval->add_option("--rankings", ev.rankings, "score a rankings CSV instead of ranking again");
    c_eval->add_option("--manifest", ev.manifest, "manifest with video durations");
    c_eval->add_flag("--mv-groups", ev.mv_groups, "report short/middle/long moment groups");
    c_eval->add_option("--format", ev.format, "table or csv")->capture_default_str();
    c_eval->add_option("--threads", ev.threads, "worker threads");
    c_eval->add_option("--out", ev.out, "report destination");

    CostFlags co;
    auto* c_cost = app.add_subcommand("cost", "Video-text GFLOPs per pair");
    c_cost->add_option("--backbone", co.backbones, "backbone name(s)")->capture_default_str();
    c_cost->add_option("--grid", co.grids, "grid edge(s)")->capture_default_str();
    c_cost->add_option("--avg-frames", co.avg_frames, "average images per video (overrides --dataset-stats)");
    c_cost->add_option("--dataset-stats,--dataset", co.dataset, "activitynet, tvr or charades")
        ->capture_default_str();
    c_cost->add_option("--frames-file", co.frames_file, "per-video frame counts for the exact mode");
    c_cost->add_option("--head", co.head, "zero-shot or finetuned")->capture_default_str();
    c_cost->add_flag("--sweep", co.sweep, "every CLIP backbone at grids 1-6");
    c_cost->add_option("--format", co.format, "table or csv")->capture_default_str();
    c_cost->add_option("--out", co.out, "report destination");

    HybridFlags hy;
    auto* c_hybrid = app.add_subcommand("hybrid", "Screen with a cheap model, re-rank the top R with an expensive one");
    c_hybrid->add_option("--high", hy.high_embeddings, "screening model embeddings");
    c_hybrid->add_option("--low", hy.low_embeddings, "re-ranking model embeddings");
    hy.high_model.add(c_hybrid, "high-");
    hy.low_model.add(c_hybrid, "low-");
    c_hybrid->add_option("--high-backbone", hy.high_backbone)->capture_default_str();
    c_hybrid->add_option("--low-backbone", hy.low_backbone)->capture_default_str();
    c_hybrid->add_option("--high-grid", hy.high_grid)->capture_default_str();
    c_hybrid->add_option("--low-grid", hy.low_grid)->capture_default_str();
    c_hybrid->add_option("-R,--rerank", hy.R, "re-rank depth")->capture_default_str();
    c_hybrid->add_option("--report", hy.report, "rankings, eval or cost")->capture_default_str();
    c_hybrid->add_flag("--stages", hy.stages, "add a reranked/screened column to rankings");
    c_hybrid->add_option("--top", hy.top, "ranks to print per query (0 = all)")->capture_default_str();
    c_hybrid->add_option("--dataset-stats,--dataset", hy.dataset, "dataset for the cost report")
        ->capture_default_str();
    c_hybrid->add_option("--corpus-size", hy.corpus_size, "test videos for the cost report");
    c_hybrid->add_option("--manifest", hy.manifest, "manifest with video durations");
    c_hybrid->add_flag("--mv-groups", hy.mv_groups);
    c_hybrid->add_option("--format", hy.format, "table or csv")->capture_default_str();
    c_hybrid->add_option("--threads", hy.threads, "worker threads");
    c_hybrid->add_option("--out", hy.out, "report destination");

    SynthFlags sy;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic planted-moment corpus");
    c_synth->add_option("--seed", sy.config.seed)->capture_default_str();
    c_synth->add_option("--videos", sy.config.num_videos)->capture_default_str();
    c_synth->add_option("--k-min", sy.config.k_min)->capture_default_str();
    c_synth->add_option("--k-max", sy.config.k_max)->capture_default_str();
    c_synth->add_option("--dim", sy.config.d)->capture_default_str();
    c_synth->add_option("--sigma", sy.config.noise_sigma)->capture_default_str();
    c_synth->add_option("--moment-fraction", sy.config.moment_fraction)->capture_default_str();
    c_synth->add_option("--queries-per-video", sy.config.queries_per_video)->capture_default_str();
    c_synth->add_option("--out", sy.out, "embeddings destination")->capture_default_str();
    c_synth->add_option("--format", sy.format, "binary or jsonl")->capture_default_str();
    c_synth->add_option("--manifest-out", sy.manifest_out, "also write a manifest with durations and spans");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        err << "error: " << e.what() << '\n';
        if (dynamic_cast<const CLI::ConversionError*>(&e) || dynamic_cast<const CLI::ValidationError*>(&e)) {
            return kValidationError;
        }
        if (dynamic_cast<const CLI::FileError*>(&e)) {
            return kIoError;
        }
        err << "run with --help for usage\n";
        return kUsageError;
    }

    try {
        if (c_tile->parsed()) {
            return cmd_tile(tile, out);
        }
        if (c_ingest->parsed()) {
            return cmd_ingest(ing, out);
        }
        if (c_retrieve->parsed()) {
            return cmd_retrieve(ret, out);
        }
        if (c_train->parsed()) {
            return cmd_train(tr, out);
        }
        if (c_eval->parsed()) {
            return cmd_eval(ev, out);
        }
        if (c_cost->parsed()) {
            return cmd_cost(co, out);
        }
        if (c_hybrid->parsed()) {
            return cmd_hybrid(hy, out);
        }
        if (c_synth->parsed()) {
            return cmd_synth(sy, out);
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    }
    return kUsageError;
}

} // namespace qasir::cli
