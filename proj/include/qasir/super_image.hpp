#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qasir {

// 8-bit RGB image, row-major, three interleaved samples per pixel.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Frame() = default;
    Frame(int w, int h);  // black
    Frame(int w, int h, std::vector<std::uint8_t> data);

    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    bool operator==(const Frame&) const = default;
};

// column_major fills one column top to bottom, then steps right.
enum class FillOrder { column_major, row_major };

struct GridSpec {
    int rows = 1;
    int cols = 1;
    int cell_px = 1;
    FillOrder fill_order = FillOrder::column_major;
    int pad_count = 0;

    int cells() const { return rows * cols; }
    int occupied() const { return cells() - pad_count; }
    bool operator==(const GridSpec&) const = default;
};

struct CellPosition {
    int row = 0;
    int col = 0;
};

// Grid coordinates of the `slot`-th filled cell.
CellPosition cell_position(const GridSpec& grid, int slot);

struct SuperImage {
    GridSpec spec;
    Frame canvas;
    std::vector<std::size_t> source_indices;
};

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

struct SuperImageSequence {
    std::string video_id;
    std::vector<SuperImage> images;
    Rational fps_used;

    std::size_t frame_count() const;
};

// SIFAR single-image layout for M frames: N = ceil(sqrt(M)), (N-1)xN when M < (N-1)N, else NxN.
GridSpec plan_sifar_grid(int frame_count, int cell_px = 1, FillOrder order = FillOrder::column_major);

// Indices floor(i * total / L) for i in [0, L); all indices when L >= total.
std::vector<std::size_t> sample_uniform_indices(std::size_t total, std::size_t target);
std::vector<Frame> sample_uniform(std::span<const Frame> frames, std::size_t target);

// Half-pixel-centre bilinear resampling; same-size input is copied unchanged.
Frame resize_bilinear(const Frame& src, int width, int height);

// ceil(L / N^2)
std::size_t super_image_count(std::size_t frame_count, int grid);

// Packs frames into consecutive NxN canvases. Each frame is resized to cell_px square;
// unused cells of the final canvas stay black.
SuperImageSequence tile_sequential(std::span<const Frame> frames, int grid, int cell_px,
                                   FillOrder order = FillOrder::column_major,
                                   std::string video_id = {}, Rational fps = {1, 1});

// Same, with explicit original frame indices (must be strictly increasing, one per frame).
SuperImageSequence tile_sequential(std::span<const Frame> frames, std::span<const std::size_t> source_indices,
                                   int grid, int cell_px, FillOrder order = FillOrder::column_major,
                                   std::string video_id = {}, Rational fps = {1, 1});

// SIFAR single super image: sample M frames uniformly and place them on plan_sifar_grid(M).
SuperImage compose_sifar(std::span<const Frame> frames, int frame_count, int cell_px,
                         FillOrder order = FillOrder::column_major);

// Occupied cells in fill order.
std::vector<Frame> untile(const SuperImage& image);

} // namespace qasir
