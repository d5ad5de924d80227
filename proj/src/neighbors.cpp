#include "mdps/neighbors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "mdps/parallel.hpp"

namespace mdps {

namespace {

struct Candidate {
    double sq_dist;
    Index index;

    bool operator<(const Candidate &o) const noexcept {
        return sq_dist < o.sq_dist || (sq_dist == o.sq_dist && index < o.index);
    }
};

std::vector<Neighbor> to_neighbors(std::vector<Candidate> &c, std::size_t keep) {
    keep = std::min(keep, c.size());
    std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(keep), c.end());
    std::vector<Neighbor> out(keep);
    for (std::size_t k = 0; k < keep; ++k) out[k] = {c[k].index, std::sqrt(c[k].sq_dist)};
    return out;
}

void check_indices(std::span<const Index> idx, std::size_t n_points, const char *what) {
    for (Index i : idx) {
        if (i >= n_points) throw std::invalid_argument(std::string(what) + ": index out of range");
    }
}

std::vector<Neighbor> knn_one(const PointCloud &cloud, Index q, std::span<const Index> pool, std::size_t k) {
    std::vector<Candidate> cand(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p) cand[p] = {squared_distance(cloud[q], cloud[pool[p]]), pool[p]};
    return to_neighbors(cand, k);
}

}  // namespace

std::vector<bool> membership(std::span<const Index> indices, std::size_t n_points) {
    std::vector<bool> flags(n_points, false);
    for (Index i : indices) flags.at(i) = true;
    return flags;
}

NeighborLists ball_query_naive(const PointCloud &cloud, std::span<const Index> centroids, double radius,
                               std::size_t max_neighbors, unsigned threads) {
    if (!(radius > 0.0)) throw std::invalid_argument("ball_query_naive: radius must be positive");
    check_indices(centroids, cloud.size(), "ball_query_naive");
    NeighborLists out;
    out.lists.resize(centroids.size());
    parallel_for(centroids.size(), resolve_threads(threads), [&](std::size_t q) {
        std::vector<Candidate> cand;
        const Point3 &c = cloud[centroids[q]];
        for (std::size_t j = 0; j < cloud.size(); ++j) {
            const double d = squared_distance(c, cloud[j]);
            if (within_radius(d, radius)) cand.push_back({d, static_cast<Index>(j)});
        }
        out.lists[q] = to_neighbors(cand, max_neighbors);
    });
    DistanceCounter::add(static_cast<std::uint64_t>(centroids.size()) * cloud.size());
    return out;
}

NeighborLists rf_ball_query(const ExclusionLists &excl, double radius, std::span<const Index> centroids,
                            std::size_t max_neighbors) {
    const auto level = excl.level_of_radius(radius);
    if (!level) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "rf_ball_query: radius " << radius << " not baked into the exclusion lists; available:";
        for (double r : excl.level_radii()) msg << ' ' << r;
        throw std::invalid_argument(msg.str());
    }
    check_indices(centroids, excl.size(), "rf_ball_query");
    NeighborLists out;
    out.lists.resize(centroids.size());
    for (std::size_t q = 0; q < centroids.size(); ++q) {
        const Index c = centroids[q];
        const std::size_t keep = std::min(excl.count(c, *level), max_neighbors);
        const auto ids = excl.neighbors(c);
        const auto d2 = excl.squared_distances(c);
        auto &list = out.lists[q];
        list.resize(keep);
        for (std::size_t k = 0; k < keep; ++k) list[k] = {ids[k], std::sqrt(d2[k])};
    }
    return out;
}

NeighborLists knn_naive(const PointCloud &cloud, std::span<const Index> queries, std::span<const Index> pool,
                        std::size_t k, unsigned threads) {
    if (k == 0) throw std::invalid_argument("knn_naive: k must be at least 1");
    if (pool.empty()) throw std::invalid_argument("knn_naive: empty pool");
    check_indices(queries, cloud.size(), "knn_naive");
    check_indices(pool, cloud.size(), "knn_naive");
    NeighborLists out;
    out.lists.resize(queries.size());
    parallel_for(queries.size(), resolve_threads(threads),
                 [&](std::size_t q) { out.lists[q] = knn_one(cloud, queries[q], pool, k); });
    DistanceCounter::add(static_cast<std::uint64_t>(queries.size()) * pool.size());
    return out;
}

NeighborLists rf_knn(const PointCloud &cloud, const ExclusionLists &excl, const std::vector<bool> &sampled,
                     std::span<const Index> queries, std::size_t k, unsigned threads) {
    if (k == 0) throw std::invalid_argument("rf_knn: k must be at least 1");
    if (excl.size() != cloud.size() || sampled.size() != cloud.size()) {
        throw std::invalid_argument("rf_knn: lists, membership and cloud sizes differ");
    }
    check_indices(queries, cloud.size(), "rf_knn");
    std::vector<Index> pool;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
        if (sampled[i]) pool.push_back(static_cast<Index>(i));
    }
    if (pool.empty()) throw std::invalid_argument("rf_knn: empty downsampled pool");

    NeighborLists out;
    out.lists.resize(queries.size());
    std::vector<std::uint8_t> fell_back(queries.size(), 0);
    parallel_for(queries.size(), resolve_threads(threads), [&](std::size_t q) {
        const Index i = queries[q];
        const auto ids = excl.neighbors(i, 0);
        const auto d2 = excl.squared_distances(i);
        auto &list = out.lists[q];
        for (std::size_t e = 0; e < ids.size() && list.size() < k; ++e) {
            if (sampled[ids[e]]) list.push_back({ids[e], std::sqrt(d2[e])});
        }
        if (list.size() < k) {
            // Everything outside R_1 is farther than every candidate inside it,
            // but with fewer than k inside, the k-th neighbor lies outside.
            list = knn_one(cloud, i, pool, k);
            fell_back[q] = 1;
        }
    });
    for (std::size_t q = 0; q < queries.size(); ++q) {
        if (fell_back[q]) {
            ++out.fallback_count;
            DistanceCounter::add(pool.size());
        }
    }
    return out;
}

}  // namespace mdps
