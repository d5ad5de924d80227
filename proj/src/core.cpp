#include "mdps/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "mdps/parallel.hpp"

namespace mdps {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

double min_positive_radius() noexcept {
    static const double r = [] {
        // Positive doubles order like their bit patterns; bisect on those for
        // the smallest v with v * v > 0.
        auto square_positive = [](std::uint64_t bits) {
            const double v = std::bit_cast<double>(bits);
            return v * v > 0.0;
        };
        std::uint64_t lo = 0;                                   // square is 0
        std::uint64_t hi = std::bit_cast<std::uint64_t>(1e-150);  // square is positive
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            (square_positive(mid) ? hi : lo) = mid;
        }
        return std::bit_cast<double>(hi);
    }();
    return r;
}

unsigned default_threads() noexcept {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1u : hc;
}

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("point cloud must contain at least one point");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto &p = points_[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
            throw std::invalid_argument("non-finite coordinate at point " + std::to_string(i));
        }
    }
}

std::array<Point3, 2> PointCloud::bounds() const noexcept {
    Point3 lo = points_.front();
    Point3 hi = points_.front();
    for (const auto &p : points_) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }
    return {lo, hi};
}

double PointCloud::bbox_diagonal() const noexcept {
    const auto [lo, hi] = bounds();
    return std::sqrt(squared_distance(lo, hi));
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_index: bound must be positive");
    // Rejection sampling on the top of the range keeps the result unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
}

double Rng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double stddev) {
    if (spare_normal_) {
        const double z = *spare_normal_;
        spare_normal_.reset();
        return mean + stddev * z;
    }
    // Box-Muller; u1 is kept away from zero.
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    return mean + stddev * radius * std::cos(angle);
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)));
}

std::string_view to_string(SampleMethod m) noexcept {
    switch (m) {
        case SampleMethod::kFps: return "fps";
        case SampleMethod::kMdps: return "mdps";
        case SampleMethod::kRandom: return "random";
        case SampleMethod::kGrid: return "grid";
        case SampleMethod::kSingleThreshold: return "single-threshold";
    }
    return "unknown";
}

SampleMethod parse_sample_method(std::string_view s) {
    for (auto m : {SampleMethod::kFps, SampleMethod::kMdps, SampleMethod::kRandom, SampleMethod::kGrid,
                   SampleMethod::kSingleThreshold}) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown sampling method: " + std::string(s));
}

void validate_sample(const SampleResult &sample, std::size_t n_points) {
    std::vector<bool> seen(n_points, false);
    for (Index i : sample.indices) {
        if (i >= n_points) throw std::invalid_argument("sample index out of range: " + std::to_string(i));
        if (seen[i]) throw std::invalid_argument("duplicate sample index: " + std::to_string(i));
        seen[i] = true;
    }
}

std::size_t count_for_stride(std::size_t n_points, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("stride must be positive");
    return std::max<std::size_t>(1, n_points / stride);
}

}  // namespace mdps
