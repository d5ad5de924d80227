#include "mdps/baselines.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>
#include <tuple>

#include "mdps/parallel.hpp"

namespace mdps {

namespace {

struct CoordsSoA {
    std::vector<double> x, y, z;

    explicit CoordsSoA(const PointCloud &cloud) : x(cloud.size()), y(cloud.size()), z(cloud.size()) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            x[i] = cloud[i].x;
            y[i] = cloud[i].y;
            z[i] = cloud[i].z;
        }
    }
};

struct Best {
    double value = -1.0;
    Index index = 0;
};

// Fused distance update against `pending` (if any) and argmax over [begin, end).
Best update_and_argmax(const CoordsSoA &soa, double *min_dists, std::optional<Index> pending, std::size_t begin,
                       std::size_t end) {
    Best best;
    if (pending) {
        const double px = soa.x[*pending], py = soa.y[*pending], pz = soa.z[*pending];
        const double *xs = soa.x.data(), *ys = soa.y.data(), *zs = soa.z.data();
        for (std::size_t j = begin; j < end; ++j) {
            const double dx = xs[j] - px, dy = ys[j] - py, dz = zs[j] - pz;
            const double d = dx * dx + dy * dy + dz * dz;
            double m = min_dists[j];
            if (d < m) {
                m = d;
                min_dists[j] = d;
            }
            if (m > best.value) {
                best.value = m;
                best.index = static_cast<Index>(j);
            }
        }
    } else {
        for (std::size_t j = begin; j < end; ++j) {
            if (min_dists[j] > best.value) {
                best.value = min_dists[j];
                best.index = static_cast<Index>(j);
            }
        }
    }
    return best;
}

void select_next(FpsState &state, Best best, std::vector<double> *curve) {
    Index s = best.index;
    if (!(best.value > 0.0)) {
        // Every remaining point coincides with a sampled one.
        s = static_cast<Index>(std::find(state.taken.begin(), state.taken.end(), false) - state.taken.begin());
        best.value = 0.0;
    }
    state.taken[s] = true;
    state.min_dists[s] = 0.0;
    state.sampled.push_back(s);
    state.pending = s;
    if (curve) curve->push_back(std::sqrt(best.value));
}

void check_fps_args(const PointCloud &cloud, std::size_t n, Index seed_index) {
    if (n == 0) throw std::invalid_argument("fps: sample count must be at least 1");
    if (n > cloud.size()) {
        throw std::invalid_argument("fps: sample count " + std::to_string(n) + " exceeds cloud size " +
                                    std::to_string(cloud.size()));
    }
    if (seed_index >= cloud.size()) throw std::invalid_argument("fps: seed index out of range");
}

}  // namespace

FpsState fps_init(const PointCloud &cloud, Index seed_index) {
    if (seed_index >= cloud.size()) throw std::invalid_argument("fps: seed index out of range");
    FpsState state;
    state.min_dists.assign(cloud.size(), kInfinity);
    state.taken.assign(cloud.size(), false);
    state.sampled.reserve(cloud.size());
    state.sampled.push_back(seed_index);
    state.taken[seed_index] = true;
    state.min_dists[seed_index] = 0.0;
    state.pending = seed_index;
    return state;
}

void fps_advance(const PointCloud &cloud, FpsState &state, std::size_t target, unsigned threads,
                 std::vector<double> *curve) {
    if (target > cloud.size()) throw std::invalid_argument("fps_advance: target exceeds cloud size");
    if (state.sampled.size() >= target) return;
    const CoordsSoA soa(cloud);
    const std::size_t n_points = cloud.size();
    const std::size_t iterations = target - state.sampled.size();
    DistanceCounter::add(static_cast<std::uint64_t>(iterations) * n_points);

    const std::size_t chunks = std::min<std::size_t>(resolve_threads(threads), n_points);
    if (chunks <= 1) {
        while (state.sampled.size() < target) {
            const Best best = update_and_argmax(soa, state.min_dists.data(), state.pending, 0, n_points);
            select_next(state, best, curve);
        }
        return;
    }

    // Persistent workers own fixed contiguous chunks; the barrier completion
    // merges chunk winners in chunk order so ties resolve to the lowest index.
    std::vector<Best> bests(chunks);
    bool done = false;
    auto on_complete = [&]() noexcept {
        Best best = bests[0];
        for (std::size_t c = 1; c < chunks; ++c) {
            if (bests[c].value > best.value) best = bests[c];
        }
        select_next(state, best, curve);
        done = state.sampled.size() >= target;
    };
    std::barrier sync(static_cast<std::ptrdiff_t>(chunks), on_complete);
    auto work = [&](std::size_t c) {
        const std::size_t b = n_points * c / chunks;
        const std::size_t e = n_points * (c + 1) / chunks;
        while (!done) {
            bests[c] = update_and_argmax(soa, state.min_dists.data(), state.pending, b, e);
            sync.arrive_and_wait();
        }
    };
    {
        std::vector<std::jthread> workers;
        for (std::size_t c = 1; c < chunks; ++c) workers.emplace_back(work, c);
        work(0);
    }
}

void fps_flush(const PointCloud &cloud, FpsState &state, unsigned threads) {
    if (!state.pending) return;
    const CoordsSoA soa(cloud);
    parallel_chunks(cloud.size(), resolve_threads(threads), [&](std::size_t, std::size_t b, std::size_t e) {
        update_and_argmax(soa, state.min_dists.data(), state.pending, b, e);
    });
    DistanceCounter::add(cloud.size());
    state.pending.reset();
}

FpsOutput fps(const PointCloud &cloud, std::size_t n, Index seed_index, unsigned threads) {
    check_fps_args(cloud, n, seed_index);
    FpsState state = fps_init(cloud, seed_index);
    FpsOutput out;
    out.curve.values.reserve(n);
    out.curve.values.push_back(kInfinity);
    fps_advance(cloud, state, n, threads, &out.curve.values);
    out.result.indices = std::move(state.sampled);
    out.result.method = SampleMethod::kFps;
    return out;
}

SampleResult fps_bruteforce_oracle(const PointCloud &cloud, std::size_t n, Index seed_index) {
    if (cloud.size() > 5000) throw std::invalid_argument("fps_bruteforce_oracle: cloud exceeds 5000 points");
    check_fps_args(cloud, n, seed_index);
    SampleResult result;
    result.method = SampleMethod::kFps;
    result.indices.push_back(seed_index);
    std::vector<bool> taken(cloud.size(), false);
    taken[seed_index] = true;
    while (result.indices.size() < n) {
        double best_value = -1.0;
        Index best_index = 0;
        for (std::size_t j = 0; j < cloud.size(); ++j) {
            if (taken[j]) continue;
            double d = kInfinity;
            for (Index s : result.indices) d = std::min(d, squared_distance(cloud[j], cloud[s]));
            if (d > best_value) {
                best_value = d;
                best_index = static_cast<Index>(j);
            }
        }
        result.indices.push_back(best_index);
        taken[best_index] = true;
    }
    return result;
}

SampleResult random_sample(const PointCloud &cloud, std::size_t n, Rng &rng) {
    if (n == 0) throw std::invalid_argument("random_sample: sample count must be at least 1");
    if (n > cloud.size()) throw std::invalid_argument("random_sample: sample count exceeds cloud size");
    std::vector<Index> perm(cloud.size());
    std::iota(perm.begin(), perm.end(), Index{0});
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.uniform_index(cloud.size() - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(n);
    SampleResult result;
    result.indices = std::move(perm);
    result.method = SampleMethod::kRandom;
    return result;
}

SampleResult grid_sample(const PointCloud &cloud, double voxel_size) {
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
        throw std::invalid_argument("grid_sample: voxel size must be positive");
    }
    using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
    const Point3 lo = cloud.bounds()[0];
    auto key_of = [&](const Point3 &p) {
        return Key{static_cast<std::int64_t>(std::floor((double(p.x) - lo.x) / voxel_size)),
                   static_cast<std::int64_t>(std::floor((double(p.y) - lo.y) / voxel_size)),
                   static_cast<std::int64_t>(std::floor((double(p.z) - lo.z) / voxel_size))};
    };

    std::vector<std::pair<Key, Index>> keyed(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) keyed[i] = {key_of(cloud[i]), static_cast<Index>(i)};
    std::sort(keyed.begin(), keyed.end());

    SampleResult result;
    result.method = SampleMethod::kGrid;
    for (std::size_t b = 0; b < keyed.size();) {
        std::size_t e = b;
        double sx = 0, sy = 0, sz = 0;
        while (e < keyed.size() && keyed[e].first == keyed[b].first) {
            const auto &p = cloud[keyed[e].second];
            sx += p.x;
            sy += p.y;
            sz += p.z;
            ++e;
        }
        const double cnt = static_cast<double>(e - b);
        const double cx = sx / cnt, cy = sy / cnt, cz = sz / cnt;
        // Members are in ascending index order, so strict < keeps the lowest on ties.
        double best = kInfinity;
        Index best_index = keyed[b].second;
        for (std::size_t k = b; k < e; ++k) {
            const auto &p = cloud[keyed[k].second];
            const double dx = p.x - cx, dy = p.y - cy, dz = p.z - cz;
            const double d = dx * dx + dy * dy + dz * dz;
            if (d < best) {
                best = d;
                best_index = keyed[k].second;
            }
        }
        result.indices.push_back(best_index);
        b = e;
    }
    SampleStats stats;
    stats.achieved_count = result.indices.size();
    stats.voxel_size = voxel_size;
    result.stats = stats;
    return result;
}

SampleResult grid_sample_to_count(const PointCloud &cloud, std::size_t target_n, double tolerance_fraction) {
    if (target_n == 0 || target_n > cloud.size()) {
        throw std::invalid_argument("grid_sample_to_count: target must be in [1, N]");
    }
    const double diag = cloud.bbox_diagonal();
    if (!(diag > 0.0)) return grid_sample(cloud, 1.0);

    const double lo_target = static_cast<double>(target_n) * (1.0 - tolerance_fraction);
    const double hi_target = static_cast<double>(target_n) * (1.0 + tolerance_fraction);
    // Search in log space: counts span several orders of magnitude.
    double log_lo = std::log(diag / std::ldexp(1.0, 20));
    double log_hi = std::log(diag);
    std::optional<SampleResult> best;
    auto distance_to_target = [&](std::size_t count) {
        return count > target_n ? count - target_n : target_n - count;
    };
    for (int iter = 0; iter < 40; ++iter) {
        const double log_mid = 0.5 * (log_lo + log_hi);
        SampleResult r = grid_sample(cloud, std::exp(log_mid));
        const std::size_t count = r.indices.size();
        if (!best || distance_to_target(count) < distance_to_target(best->indices.size())) best = std::move(r);
        const auto c = static_cast<double>(count);
        if (c >= lo_target && c <= hi_target) break;
        if (c > hi_target) {
            log_lo = log_mid;  // too many points: grow voxels
        } else {
            log_hi = log_mid;
        }
    }
    // The lower bracket itself is never evaluated by bisection; check it for the
    // limit case target_n == N.
    if (distance_to_target(best->indices.size()) != 0 && target_n == cloud.size()) {
        SampleResult r = grid_sample(cloud, diag / std::ldexp(1.0, 20));
        if (distance_to_target(r.indices.size()) < distance_to_target(best->indices.size())) best = std::move(r);
    }
    return std::move(*best);
}

}  // namespace mdps
