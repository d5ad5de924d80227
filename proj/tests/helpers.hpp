#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mdps/core.hpp"

namespace testing {

inline mdps::PointCloud uniform_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    mdps::Rng rng(seed);
    std::vector<mdps::Point3> pts(n);
    for (auto &p : pts) {
        p.x = static_cast<float>(scale * rng.uniform01());
        p.y = static_cast<float>(scale * rng.uniform01());
        p.z = static_cast<float>(scale * rng.uniform01());
    }
    return mdps::PointCloud(std::move(pts));
}

inline mdps::PointCloud square_corners() {
    return mdps::PointCloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}});
}

inline mdps::PointCloud collinear3() { return mdps::PointCloud({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}); }

/// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("mdps-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }
    const std::filesystem::path &path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
