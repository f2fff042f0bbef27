#include "qasir/super_image.hpp"

#include "qasir/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace qasir {

Frame::Frame(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw InvalidInput("frame dimensions must be positive");
    }
    pixels.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

Frame::Frame(int w, int h, std::vector<std::uint8_t> data) : width(w), height(h), pixels(std::move(data)) {
    if (w <= 0 || h <= 0) {
        throw InvalidInput("frame dimensions must be positive");
    }
    if (pixels.size() != static_cast<std::size_t>(w) * h * 3) {
        throw InvalidInput("frame pixel buffer must hold width*height*3 samples");
    }
}

CellPosition cell_position(const GridSpec& grid, int slot) {
    if (slot < 0 || slot >= grid.cells()) {
        throw InvalidInput("cell slot out of range");
    }
    if (grid.fill_order == FillOrder::column_major) {
        return {slot % grid.rows, slot / grid.rows};
    }
    return {slot / grid.cols, slot % grid.cols};
}

std::size_t SuperImageSequence::frame_count() const {
    std::size_t n = 0;
    for (const auto& img : images) {
        n += img.source_indices.size();
    }
    return n;
}

GridSpec plan_sifar_grid(int frame_count, int cell_px, FillOrder order) {
    if (frame_count < 1) {
        throw InvalidInput("SIFAR layout needs at least one frame");
    }
    if (cell_px < 1) {
        throw InvalidInput("cell size must be positive");
    }
    int n = 1;
    while (n * n < frame_count) {
        ++n;
    }
    GridSpec g;
    g.cols = n;
    g.rows = frame_count < (n - 1) * n ? n - 1 : n;
    g.cell_px = cell_px;
    g.fill_order = order;
    g.pad_count = g.rows * g.cols - frame_count;
    return g;
}

std::vector<std::size_t> sample_uniform_indices(std::size_t total, std::size_t target) {
    if (total == 0) {
        throw InvalidInput("cannot sample from an empty frame list");
    }
    if (target == 0) {
        throw InvalidInput("sample count must be at least 1");
    }
    std::vector<std::size_t> out;
    if (target >= total) {
        out.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            out[i] = i;
        }
        return out;
    }
    out.reserve(target);
    for (std::size_t i = 0; i < target; ++i) {
        out.push_back(i * total / target);
    }
    return out;
}

std::vector<Frame> sample_uniform(std::span<const Frame> frames, std::size_t target) {
    std::vector<Frame> out;
    for (auto idx : sample_uniform_indices(frames.size(), target)) {
        out.push_back(frames[idx]);
    }
    return out;
}

Frame resize_bilinear(const Frame& src, int width, int height) {
    if (src.width <= 0 || src.height <= 0) {
        throw InvalidInput("cannot resize an empty frame");
    }
    if (src.width == width && src.height == height) {
        return src;
    }
    Frame dst(width, height);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            std::uint8_t* out = dst.at(x, y);
            for (int c = 0; c < 3; ++c) {
                const double top = src.at(x0, y0)[c] * (1.0 - wx) + src.at(x1, y0)[c] * wx;
                const double bottom = src.at(x0, y1)[c] * (1.0 - wx) + src.at(x1, y1)[c] * wx;
                const double v = top * (1.0 - wy) + bottom * wy;
                out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return dst;
}

std::size_t super_image_count(std::size_t frame_count, int grid) {
    if (grid < 1) {
        throw InvalidInput("grid size must be at least 1");
    }
    const std::size_t per = static_cast<std::size_t>(grid) * grid;
    return (frame_count + per - 1) / per;
}

namespace {

void blit(Frame& canvas, const Frame& cell, int row, int col, int cell_px) {
    for (int y = 0; y < cell_px; ++y) {
        const std::uint8_t* src = cell.at(0, y);
        std::uint8_t* dst = canvas.at(col * cell_px, row * cell_px + y);
        std::copy(src, src + static_cast<std::size_t>(cell_px) * 3, dst);
    }
}

Frame crop(const Frame& canvas, int row, int col, int cell_px) {
    Frame cell(cell_px, cell_px);
    for (int y = 0; y < cell_px; ++y) {
        const std::uint8_t* src = canvas.at(col * cell_px, row * cell_px + y);
        std::copy(src, src + static_cast<std::size_t>(cell_px) * 3, cell.at(0, y));
    }
    return cell;
}

SuperImage place(std::span<const Frame> frames, std::span<const std::size_t> indices, const GridSpec& grid) {
    SuperImage img;
    img.spec = grid;
    img.canvas = Frame(grid.cols * grid.cell_px, grid.rows * grid.cell_px);
    img.source_indices.assign(indices.begin(), indices.end());
    for (std::size_t slot = 0; slot < frames.size(); ++slot) {
        const auto pos = cell_position(grid, static_cast<int>(slot));
        const Frame cell = resize_bilinear(frames[slot], grid.cell_px, grid.cell_px);
        blit(img.canvas, cell, pos.row, pos.col, grid.cell_px);
    }
    return img;
}

} // namespace

SuperImageSequence tile_sequential(std::span<const Frame> frames, int grid, int cell_px, FillOrder order,
                                   std::string video_id, Rational fps) {
    std::vector<std::size_t> indices(frames.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        indices[i] = i;
    }
    return tile_sequential(frames, indices, grid, cell_px, order, std::move(video_id), fps);
}

SuperImageSequence tile_sequential(std::span<const Frame> frames, std::span<const std::size_t> source_indices,
                                   int grid, int cell_px, FillOrder order, std::string video_id, Rational fps) {
    if (frames.empty()) {
        throw InvalidInput("tiling needs at least one frame");
    }
    if (grid < 1 || cell_px < 1) {
        throw InvalidInput("grid size and cell size must be positive");
    }
    if (source_indices.size() != frames.size()) {
        throw InvalidInput("one source index per frame is required");
    }
    for (std::size_t i = 1; i < source_indices.size(); ++i) {
        if (source_indices[i] <= source_indices[i - 1]) {
            throw InvalidInput("source indices must be strictly increasing");
        }
    }

    SuperImageSequence seq;
    seq.video_id = std::move(video_id);
    seq.fps_used = fps;
    const std::size_t per = static_cast<std::size_t>(grid) * grid;
    const std::size_t count = super_image_count(frames.size(), grid);
    seq.images.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t begin = k * per;
        const std::size_t n = std::min(per, frames.size() - begin);
        GridSpec spec;
        spec.rows = grid;
        spec.cols = grid;
        spec.cell_px = cell_px;
        spec.fill_order = order;
        spec.pad_count = static_cast<int>(per - n);
        seq.images.push_back(place(frames.subspan(begin, n), source_indices.subspan(begin, n), spec));
    }
    return seq;
}

SuperImage compose_sifar(std::span<const Frame> frames, int frame_count, int cell_px, FillOrder order) {
    const GridSpec grid = plan_sifar_grid(frame_count, cell_px, order);
    const auto indices = sample_uniform_indices(frames.size(), static_cast<std::size_t>(frame_count));
    std::vector<Frame> picked;
    picked.reserve(indices.size());
    for (auto i : indices) {
        picked.push_back(frames[i]);
    }
    // Fewer source frames than M: the extra cells become padding.
    GridSpec spec = grid;
    spec.pad_count = grid.cells() - static_cast<int>(picked.size());
    return place(picked, indices, spec);
}

std::vector<Frame> untile(const SuperImage& image) {
    const auto& g = image.spec;
    if (image.canvas.width != g.cols * g.cell_px || image.canvas.height != g.rows * g.cell_px) {
        throw InvalidInput("canvas size does not match its grid spec");
    }
    std::vector<Frame> out;
    out.reserve(static_cast<std::size_t>(g.occupied()));
    for (int slot = 0; slot < g.occupied(); ++slot) {
        const auto pos = cell_position(g, slot);
        out.push_back(crop(image.canvas, pos.row, pos.col, g.cell_px));
    }
    return out;
}

} // namespace qasir
