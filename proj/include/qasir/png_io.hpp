#pragma once

#include "qasir/super_image.hpp"

#include <filesystem>

namespace qasir {

// Any PNG colour type is expanded to 8-bit RGB; alpha is dropped.
Frame read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Frame& frame);

} // namespace qasir
