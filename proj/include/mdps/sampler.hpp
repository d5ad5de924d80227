#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mdps/core.hpp"
#include "mdps/curve.hpp"

namespace mdps {

/// Per-point neighbor lists within the largest radius, sorted by (squared
/// distance, index), with per-level prefix counts. Level l corresponds to
/// level_radii[l]: the first `segment_levels` levels are the segment
/// thresholds R_1..R_nseg, any further levels are extra query radii.
class ExclusionLists {
public:
    std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t levels() const noexcept { return level_radii_.size(); }
    std::size_t segment_levels() const noexcept { return segment_levels_; }
    std::span<const double> level_radii() const noexcept { return level_radii_; }
    double max_radius() const noexcept { return max_radius_; }

    /// Everything stored for point i (within the largest radius).
    std::span<const Index> neighbors(std::size_t i) const noexcept {
        return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
    }
    std::span<const double> squared_distances(std::size_t i) const noexcept {
        return {sq_dists_.data() + offsets_[i], sq_dists_.data() + offsets_[i + 1]};
    }
    /// Number of leading entries of point i strictly within level_radii[level].
    std::size_t count(std::size_t i, std::size_t level) const noexcept {
        return level_counts_[i * level_radii_.size() + level];
    }
    std::span<const Index> neighbors(std::size_t i, std::size_t level) const noexcept {
        return neighbors(i).first(count(i, level));
    }

    /// Level whose radius equals r exactly.
    std::optional<std::size_t> level_of_radius(double r) const noexcept;

    std::size_t total_entries() const noexcept { return neighbors_.size(); }
    std::uint64_t distance_evaluations() const noexcept { return distance_evaluations_; }
    /// Set when the average list length exceeds N/2.
    bool near_complete() const noexcept { return near_complete_; }

private:
    friend class ExclusionBuilder;

    std::vector<std::size_t> offsets_;
    std::vector<Index> neighbors_;
    std::vector<double> sq_dists_;
    std::vector<double> level_radii_;
    std::vector<Index> level_counts_;
    std::size_t segment_levels_ = 0;
    double max_radius_ = 0.0;
    std::uint64_t distance_evaluations_ = 0;
    bool near_complete_ = false;
};

enum class ExclusionBuild {
    /// Every unordered pair (and every point with itself) evaluated exactly once.
    kAllPairs,
    /// Uniform cell grid of edge >= the largest radius; only pairs in
    /// neighboring cells are evaluated, each once.
    kCellGrid,
};

/// Builds the fused exclusion lists for all segment thresholds plus optional
/// extra radii in one distance pass. All radii must be positive and finite.
ExclusionLists build_exclusion_lists(const PointCloud &cloud, const SegmentedThresholds &thresholds,
                                     std::span<const double> extra_radii = {},
                                     ExclusionBuild build = ExclusionBuild::kAllPairs, unsigned threads = 0);

/// Replaces non-positive radii by min_positive_radius(). Returns true if any
/// radius was clamped.
bool clamp_degenerate_radii(SegmentedThresholds &thresholds);

/// Fixed-size bitmap with per-block population counts for fast rank selection.
class SegmentBitmap {
public:
    explicit SegmentBitmap(std::size_t bits = 0);

    std::size_t size() const noexcept { return bits_; }
    std::size_t count() const noexcept { return count_; }
    bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
    /// Clears bit i; returns whether it was set.
    bool clear(std::size_t i) noexcept;
    /// Index of the rank-th set bit (0-based), rank < count().
    std::size_t select(std::size_t rank) const noexcept;
    std::size_t find_first() const noexcept { return select(0); }

private:
    static constexpr std::size_t kWordsPerBlock = 64;

    std::size_t bits_;
    std::size_t count_;
    std::vector<std::uint64_t> words_;
    std::vector<std::uint32_t> block_counts_;
};

enum class PickMode { kRandom, kLowestIndex };

struct PredictedSampling {
    SampleResult partial;
    /// Segment (1-based) each sample was drawn in; 0 for prefix samples.
    std::vector<std::uint32_t> sample_segment;
    bool seg_exhausted = false;
    std::size_t last_index_reached = 0;
    std::size_t segments_entered = 0;
};

/// Bitmap-driven sampling along the segmented thresholds, continuing the FPS
/// prefix in `prefix_result` toward n samples.
PredictedSampling sample_with_predicted_distance(const PointCloud &cloud, std::size_t n,
                                                 const SampleResult &prefix_result, const ExclusionLists &excl,
                                                 const SegmentedThresholds &thresholds, Rng &rng,
                                                 PickMode pick = PickMode::kRandom);

/// Completes a partial sample with FPS, seeding the distance array from the
/// level-1 exclusion entries only. Points with no sampled neighbor within R_1
/// start at +inf.
SampleResult early_termination(const PointCloud &cloud, std::size_t n, const SampleResult &partial,
                               const ExclusionLists &excl, unsigned threads = 0);

struct MdpsConfig {
    double p = 0.1;
    std::size_t nseg = 6;
    /// An OracleCurve with an empty truth is computed on the fly (and timed as
    /// curve estimation).
    CurveEstimator estimator = OracleCurve{};
    Index seed_index = 0;
    std::uint64_t rng_seed = 0;
    PickMode pick = PickMode::kRandom;
    ExclusionBuild build = ExclusionBuild::kAllPairs;
    std::vector<double> extra_radii;
    unsigned threads = 0;
};

struct MdpsOutput {
    SampleResult result;
    MinDistCurve estimated;
    SegmentedThresholds thresholds;
    ExclusionLists exclusion;
    std::vector<std::uint32_t> sample_segment;
};

MdpsOutput mdps(const PointCloud &cloud, std::size_t n, const MdpsConfig &config);

}  // namespace mdps
