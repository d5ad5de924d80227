#pragma once

#include <optional>
#include <vector>

#include "mdps/core.hpp"

namespace mdps {

/// Live farthest-point-sampling state.
///
/// min_dists holds squared distances to the nearest sampled point, +inf before
/// any sample touches a point and 0 for sampled points. When `pending` is set,
/// the most recent sample has been selected but its distances are not yet
/// folded into min_dists; `flush` applies it.
struct FpsState {
    std::vector<double> min_dists;
    std::vector<Index> sampled;
    std::vector<bool> taken;
    std::optional<Index> pending;

    Index last() const { return sampled.back(); }
};

struct FpsOutput {
    SampleResult result;
    MinDistCurve curve;
};

/// Fresh state with only the seed selected (and pending).
FpsState fps_init(const PointCloud &cloud, Index seed_index);

/// Runs FPS iterations until `target` points are sampled. Each newly selected
/// point's true maximized minimum distance is appended to `curve` when given.
/// Argmax ties go to the lowest index; if every unsampled point sits at
/// distance 0 the lowest unsampled index is chosen.
void fps_advance(const PointCloud &cloud, FpsState &state, std::size_t target, unsigned threads = 0,
                 std::vector<double> *curve = nullptr);

/// Folds the pending sample into min_dists.
void fps_flush(const PointCloud &cloud, FpsState &state, unsigned threads = 0);

/// Exact FPS. Throws std::invalid_argument for n == 0, n > N or a bad seed.
FpsOutput fps(const PointCloud &cloud, std::size_t n, Index seed_index = 0, unsigned threads = 0);

/// Recomputes every point-to-set distance from scratch each iteration. Test
/// oracle only; refuses clouds larger than 5000 points.
SampleResult fps_bruteforce_oracle(const PointCloud &cloud, std::size_t n, Index seed_index = 0);

/// n distinct indices drawn uniformly without replacement.
SampleResult random_sample(const PointCloud &cloud, std::size_t n, Rng &rng);

/// One point per occupied voxel: the member closest to the voxel barycenter
/// (ties to the lowest index). Voxels are anchored at the bounding-box minimum
/// and the result is ordered by voxel key.
SampleResult grid_sample(const PointCloud &cloud, double voxel_size);

/// Binary search on the voxel size for a count within target_n * (1 +- tol).
/// Always returns the closest count found; stats carry the achieved count and
/// the voxel size used.
SampleResult grid_sample_to_count(const PointCloud &cloud, std::size_t target_n, double tolerance_fraction);

}  // namespace mdps
