#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace qasir {

struct EncoderProfile {
    std::string name;
    int d = 0;                      // joint embedding dimension
    int resolution = 0;             // input pixels per side
    double per_image_gflops = 0.0;  // vision backbone, one image
    double params_m = 0.0;
    double text_gflops = 0.0;       // text backbone, one query
};

// Built-in backbones keyed by name ("clip-b32", "clip-l14", "clip-l14-336", "ms-sl", ...).
const std::vector<EncoderProfile>& cost_profiles();
// Throws ConfigError for unknown names.
const EncoderProfile& find_profile(const std::string& name);

// Transformer text encoder, dense multiply-accumulates x 2:
// layers * (tokens * 12 w^2 + 2 tokens^2 w) + w * proj_dim for the final projection.
double transformer_text_gflops(int width, int layers, int tokens, int proj_dim);

// Multiply-accumulate counts of the trainable/matching heads, per video-query pair.
struct HeadFlops {
    double encoder_macs = 0.0;   // adapters + temporal encoder
    double matching_macs = 0.0;  // attention aggregation + cosine

    double encoder_gflops() const { return 2.0 * encoder_macs / 1e9; }
    double matching_gflops() const { return 2.0 * matching_macs / 1e9; }
};

struct HeadDescription {
    double images = 1.0;  // K, may be a dataset average
    int d = 0;
    int hidden = 192;
    bool vision_adapter = false;
    bool text_adapter = false;
    bool temporal_encoder = false;
    int heads = 8;
    int ff_width = 0;  // 0 = 4d
};

// K*d dots, K softmax terms, K*d weighted sum, 3d for the cosine.
double attention_macs(double images, int d);
// 2*d*h + d + h per vector.
double adapter_macs(int d, int hidden);
// One encoder layer over K rows: projections, scores, softmax, mixing, FFN, two norms, PE add.
double temporal_macs(double images, int d, int heads, int ff_width);

HeadFlops head_flops(const HeadDescription& head);

struct PipelineCost {
    double backbone_gflops = 0.0;
    double text_backbone_gflops = 0.0;
    double encoder_gflops = 0.0;
    double matching_gflops = 0.0;
    double total = 0.0;
};

// images x per-image backbone + one query through the text backbone + head terms.
PipelineCost video_text_gflops(const EncoderProfile& profile, double num_images, const HeadFlops& head = {});
PipelineCost video_text_gflops(const std::string& backbone, double num_images, const HeadFlops& head = {});

// Exact per-video mode: mean cost over videos with ceil(L/N^2) images each.
PipelineCost video_text_gflops_exact(const EncoderProfile& profile, std::span<const std::size_t> frame_counts,
                                     int grid, const HeadFlops& head = {});

std::size_t images_per_video(std::size_t frames, int grid);

// sum ceil(L/N^2) / sum L over a corpus.
double grid_cost_ratio(std::span<const std::size_t> frame_counts, int grid);
double grid_cost_ratio(std::size_t frames, int grid);

struct DatasetStats {
    std::string name;
    std::array<double, 6> avg_images{};  // average super images per video for N = 1..6
    std::size_t test_videos = 0;         // 0 = unknown

    double images(int grid) const;
};

// "activitynet", "tvr", "charades". Throws ConfigError otherwise.
const DatasetStats& dataset_stats(const std::string& name);

struct CostRow {
    std::string backbone;
    int grid = 1;
    double images = 0.0;
    PipelineCost cost;
};

void write_cost_csv(std::ostream& out, std::span<const CostRow> rows);
void write_cost_table(std::ostream& out, std::span<const CostRow> rows);

// Formats like "5.4x10^2".
std::string scientific_2sig(double value);

} // namespace qasir
