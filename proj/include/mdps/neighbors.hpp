#pragma once

#include <span>
#include <vector>

#include "mdps/core.hpp"
#include "mdps/sampler.hpp"

namespace mdps {

struct Neighbor {
    Index index = 0;
    double distance = 0.0;  // true distance

    friend bool operator==(const Neighbor &, const Neighbor &) = default;
};

/// One list per query, sorted by (distance, index).
struct NeighborLists {
    std::vector<std::vector<Neighbor>> lists;
    /// Queries answered by the brute-force fallback (redundancy-free k-NN only).
    std::size_t fallback_count = 0;

    std::size_t size() const noexcept { return lists.size(); }
    const std::vector<Neighbor> &operator[](std::size_t q) const { return lists[q]; }
};

/// Brute force; strict `<` radius test; keeps the nearest max_neighbors.
NeighborLists ball_query_naive(const PointCloud &cloud, std::span<const Index> centroids, double radius,
                               std::size_t max_neighbors, unsigned threads = 0);

/// Reads the R-level prefix of each centroid's exclusion list. No distance is
/// computed. R must have been baked into `excl` at construction.
NeighborLists rf_ball_query(const ExclusionLists &excl, double radius, std::span<const Index> centroids,
                            std::size_t max_neighbors);

/// Brute force over the pool; min(k, |pool|) results per query.
NeighborLists knn_naive(const PointCloud &cloud, std::span<const Index> queries, std::span<const Index> pool,
                        std::size_t k, unsigned threads = 0);

/// k-NN restricted to sampled members of each query's level-1 exclusion list,
/// falling back to brute force over the whole pool when fewer than k
/// candidates are found. `sampled` is a membership flag per cloud point.
NeighborLists rf_knn(const PointCloud &cloud, const ExclusionLists &excl, const std::vector<bool> &sampled,
                     std::span<const Index> queries, std::size_t k, unsigned threads = 0);

std::vector<bool> membership(std::span<const Index> indices, std::size_t n_points);

}  // namespace mdps
