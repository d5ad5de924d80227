#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mdps {

using Index = std::uint32_t;

struct Point3 {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;

    friend bool operator==(const Point3 &, const Point3 &) = default;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Squared Euclidean distance, accumulated in double.
inline double squared_distance(const Point3 &a, const Point3 &b) noexcept {
    const double dx = static_cast<double>(a.x) - static_cast<double>(b.x);
    const double dy = static_cast<double>(a.y) - static_cast<double>(b.y);
    const double dz = static_cast<double>(a.z) - static_cast<double>(b.z);
    return dx * dx + dy * dy + dz * dz;
}

/// The radius predicate shared by exclusion lists and ball queries: a pair is
/// "within" R iff its squared distance is strictly below R*R.
inline bool within_radius(double sq_dist, double radius) noexcept {
    return sq_dist < radius * radius;
}

/// Smallest radius whose square is still a positive double. Thresholds that
/// collapse to zero or below are clamped to this value so that a point (and
/// its exact duplicates) always excludes itself.
double min_positive_radius() noexcept;

/// Process-wide instrumentation of pair-distance evaluations performed by the
/// library kernels (exclusion construction, neighbor search, quality). Kernels
/// add their local tallies in bulk.
class DistanceCounter {
public:
    static std::uint64_t value() noexcept { return count_.load(std::memory_order_relaxed); }
    static void add(std::uint64_t n) noexcept { count_.fetch_add(n, std::memory_order_relaxed); }
    static void reset() noexcept { count_.store(0, std::memory_order_relaxed); }

private:
    static inline std::atomic<std::uint64_t> count_{0};
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string &what, std::size_t location)
        : std::runtime_error(what), location_(location) {}
    /// Line number (text formats, 1-based) or byte offset (binary formats).
    std::size_t location() const noexcept { return location_; }

private:
    std::size_t location_;
};

/// Immutable cloud of N >= 1 finite points.
class PointCloud {
public:
    explicit PointCloud(std::vector<Point3> points);

    std::size_t size() const noexcept { return points_.size(); }
    const Point3 &operator[](std::size_t i) const noexcept { return points_[i]; }
    std::span<const Point3> points() const noexcept { return points_; }

    /// Axis-aligned bounds as {min, max}.
    std::array<Point3, 2> bounds() const noexcept;
    double bbox_diagonal() const noexcept;

private:
    std::vector<Point3> points_;
};

/// Deterministic generator. The engine is std::mt19937_64 (sequence fixed by
/// the standard); all distributions are implemented here so output does not
/// depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_index(std::uint64_t bound);
    /// Uniform double in [0, 1).
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    double normal(double mean = 0.0, double stddev = 1.0);

    /// Independent sub-generator for a numbered task; depends only on this
    /// generator's seed and the stream id, never on how many values were drawn.
    Rng split(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::optional<double> spare_normal_;
};

enum class SampleMethod { kFps, kMdps, kRandom, kGrid, kSingleThreshold };

std::string_view to_string(SampleMethod m) noexcept;
SampleMethod parse_sample_method(std::string_view s);

/// Per-stage timings follow the four MDPS stages; FPS and the other baselines
/// only fill total_ms.
struct StageTimes {
    double curve_estimation_ms = 0.0;
    double segmentation_ms = 0.0;
    double sampling_ms = 0.0;
    double early_termination_ms = 0.0;
    double total_ms = 0.0;
};

struct SampleStats {
    std::size_t fps_prefix_iters = 0;
    std::size_t early_term_iters = 0;
    std::size_t segments_entered = 0;
    std::size_t achieved_count = 0;
    double voxel_size = 0.0;
    bool degenerate_curve = false;
    StageTimes times;
};

struct SampleResult {
    std::vector<Index> indices;
    SampleMethod method = SampleMethod::kFps;
    std::optional<SampleStats> stats;

    std::size_t size() const noexcept { return indices.size(); }
};

/// Per-iteration maximized minimum distance of an FPS run (true distances).
/// Position 0 holds +inf for the seed.
struct MinDistCurve {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const noexcept { return values[i]; }
};

/// Throws std::invalid_argument unless indices are distinct and < n_points.
void validate_sample(const SampleResult &sample, std::size_t n_points);

/// Sample count for a stride: floor(N / stride), at least 1.
std::size_t count_for_stride(std::size_t n_points, std::size_t stride);

}  // namespace mdps
