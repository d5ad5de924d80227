#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mdps/core.hpp"

namespace mdps {

enum class CloudFormat { kXyzText, kPcfBinary };

/// Picks the format from the extension: ".pcf" is binary, anything else text.
CloudFormat format_from_path(const std::filesystem::path &path);

/// xyz-text: one point per line, three whitespace-separated floats, extra
/// columns ignored, '#' lines and blank lines skipped.
/// pcf-binary: "PCF1", little-endian u32 count, count*3 little-endian f32.
PointCloud load_cloud(const std::filesystem::path &path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path &path);

void save_cloud(const PointCloud &cloud, const std::filesystem::path &path, CloudFormat format);
void save_cloud(const PointCloud &cloud, const std::filesystem::path &path);

/// indices.csv: header "index", one index per line.
void save_indices(std::span<const Index> indices, const std::filesystem::path &path);
std::vector<Index> load_indices(const std::filesystem::path &path);

}  // namespace mdps
