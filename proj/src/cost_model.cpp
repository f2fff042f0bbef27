#include "qasir/cost_model.hpp"

#include "qasir/errors.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>

namespace qasir {

double transformer_text_gflops(int width, int layers, int tokens, int proj_dim) {
    const double w = width;
    const double t = tokens;
    const double macs = layers * (t * 12.0 * w * w + 2.0 * t * t * w) + w * proj_dim;
    return 2.0 * macs / 1e9;
}

const std::vector<EncoderProfile>& cost_profiles() {
    static const std::vector<EncoderProfile> profiles = [] {
        const double b32_text = transformer_text_gflops(512, 12, 77, 512);
        const double l14_text = transformer_text_gflops(768, 12, 77, 768);
        return std::vector<EncoderProfile>{
            {"clip-b32", 512, 224, 8.8, 151.3, b32_text},
            {"clip-l14", 768, 224, 162.0, 427.6, l14_text},
            {"clip-l14-336", 768, 336, 381.9, 427.9, l14_text},
            // I3D + ResNet152 / RoBERTa pipelines; no separate text figure, so the image figure stands in.
            {"ms-sl", 1024, 224, 40.0, 433.3, 40.0},
            {"gmmformer", 1024, 224, 40.0, 441.3, 40.0},
            {"dl-dkd", 1024, 224, 40.0, 439.0, 40.0},
        };
    }();
    return profiles;
}

const EncoderProfile& find_profile(const std::string& name) {
    for (const auto& p : cost_profiles()) {
        if (p.name == name) {
            return p;
        }
    }
    throw ConfigError("unknown backbone: " + name);
}

double attention_macs(double images, int d) {
    return images * d + images + images * d + 3.0 * d;
}

double adapter_macs(int d, int hidden) {
    return 2.0 * d * hidden + d + hidden;
}

double temporal_macs(double images, int d, int heads, int ff_width) {
    const double k = images;
    const double f = ff_width > 0 ? ff_width : 4.0 * d;
    const double projections = 4.0 * k * d * d;
    const double attention = 2.0 * k * k * d + heads * k * k;
    const double ffn = 2.0 * k * d * f;
    const double norms = 2.0 * 2.0 * k * d;
    const double pe = k * d;
    return projections + attention + ffn + norms + pe;
}

HeadFlops head_flops(const HeadDescription& h) {
    if (h.d < 1 || !(h.images > 0.0)) {
        throw InvalidInput("head description needs d >= 1 and a positive image count");
    }
    HeadFlops out;
    if (h.vision_adapter) {
        out.encoder_macs += h.images * adapter_macs(h.d, h.hidden);
    }
    if (h.text_adapter) {
        out.encoder_macs += adapter_macs(h.d, h.hidden);
    }
    if (h.temporal_encoder) {
        out.encoder_macs += temporal_macs(h.images, h.d, h.heads, h.ff_width);
    }
    out.matching_macs = attention_macs(h.images, h.d);
    return out;
}

PipelineCost video_text_gflops(const EncoderProfile& profile, double num_images, const HeadFlops& head) {
    if (!(num_images > 0.0)) {
        throw InvalidInput("number of images must be positive");
    }
    PipelineCost c;
    c.backbone_gflops = num_images * profile.per_image_gflops;
    c.text_backbone_gflops = profile.text_gflops;
    c.encoder_gflops = head.encoder_gflops();
    c.matching_gflops = head.matching_gflops();
    c.total = c.backbone_gflops + c.text_backbone_gflops + c.encoder_gflops + c.matching_gflops;
    return c;
}

PipelineCost video_text_gflops(const std::string& backbone, double num_images, const HeadFlops& head) {
    return video_text_gflops(find_profile(backbone), num_images, head);
}

std::size_t images_per_video(std::size_t frames, int grid) {
    if (grid < 1 || frames == 0) {
        throw InvalidInput("grid and frame count must be positive");
    }
    const std::size_t cells = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    return (frames + cells - 1) / cells;
}

PipelineCost video_text_gflops_exact(const EncoderProfile& profile, std::span<const std::size_t> frame_counts,
                                     int grid, const HeadFlops& head) {
    if (frame_counts.empty()) {
        throw InvalidInput("no videos given");
    }
    PipelineCost mean;
    for (const auto frames : frame_counts) {
        const auto c = video_text_gflops(profile, static_cast<double>(images_per_video(frames, grid)), head);
        mean.backbone_gflops += c.backbone_gflops;
        mean.text_backbone_gflops += c.text_backbone_gflops;
        mean.encoder_gflops += c.encoder_gflops;
        mean.matching_gflops += c.matching_gflops;
    }
    const double n = static_cast<double>(frame_counts.size());
    mean.backbone_gflops /= n;
    mean.text_backbone_gflops /= n;
    mean.encoder_gflops /= n;
    mean.matching_gflops /= n;
    mean.total = mean.backbone_gflops + mean.text_backbone_gflops + mean.encoder_gflops + mean.matching_gflops;
    return mean;
}

double grid_cost_ratio(std::span<const std::size_t> frame_counts, int grid) {
    if (frame_counts.empty()) {
        throw InvalidInput("no videos given");
    }
    double images = 0.0;
    double frames = 0.0;
    for (const auto l : frame_counts) {
        images += static_cast<double>(images_per_video(l, grid));
        frames += static_cast<double>(l);
    }
    return images / frames;
}

double grid_cost_ratio(std::size_t frames, int grid) {
    return grid_cost_ratio(std::span<const std::size_t>(&frames, 1), grid);
}

double DatasetStats::images(int grid) const {
    if (grid < 1 || grid > static_cast<int>(avg_images.size())) {
        throw ConfigError(name + " has average image counts for grids 1-6 only");
    }
    return avg_images[static_cast<std::size_t>(grid - 1)];
}

const DatasetStats& dataset_stats(const std::string& name) {
    static const std::vector<DatasetStats> stats = {
        {"activitynet", {60.3, 15.5, 7.1, 4.2, 2.9, 2.1}, 4917},
        {"tvr", {229.4, 57.7, 23.9, 14.8, 9.6, 6.8}, 2179},
        {"charades", {31.1, 8.1, 3.9, 2.4, 1.8, 1.1}, 0},
    };
    for (const auto& s : stats) {
        if (s.name == name) {
            return s;
        }
    }
    throw ConfigError("unknown dataset: " + name + " (expected activitynet, tvr or charades)");
}

std::string scientific_2sig(double value) {
    if (value == 0.0) {
        return "0.0x10^0";
    }
    int exponent = static_cast<int>(std::floor(std::log10(std::fabs(value))));
    double mantissa = value / std::pow(10.0, exponent);
    mantissa = std::round(mantissa * 10.0) / 10.0;
    if (std::fabs(mantissa) >= 10.0) {
        mantissa /= 10.0;
        ++exponent;
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.1fx10^%d", mantissa, exponent);
    return buf;
}

void write_cost_csv(std::ostream& out, std::span<const CostRow> rows) {
    out << "backbone,grid,images,backbone_gflops,text_gflops,encoder_gflops,matching_gflops,total_gflops\n";
    out << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.backbone << ',' << r.grid << ',' << r.images << ',' << r.cost.backbone_gflops << ','
            << r.cost.text_backbone_gflops << ',' << r.cost.encoder_gflops << ',' << r.cost.matching_gflops << ','
            << r.cost.total << '\n';
    }
}

void write_cost_table(std::ostream& out, std::span<const CostRow> rows) {
    out << std::left << std::setw(14) << "backbone" << std::setw(6) << "grid" << std::right << std::setw(9)
        << "#Frames" << std::setw(12) << "GFLOPs" << std::setw(13) << "total" << '\n';
    for (const auto& r : rows) {
        const std::string grid = std::to_string(r.grid) + "x" + std::to_string(r.grid);
        out << std::left << std::setw(14) << r.backbone << std::setw(6) << grid << std::right << std::fixed
            << std::setprecision(1) << std::setw(9) << r.images << std::setw(12) << scientific_2sig(r.cost.total)
            << std::setw(13) << std::setprecision(3) << r.cost.total << '\n';
        out.unsetf(std::ios::floatfield);
    }
}

} // namespace qasir
