#include "mdps/sampler.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mdps/parallel.hpp"

namespace mdps {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct PairRecord {
    Index a;
    Index b;
    double sq_dist;
};

struct Entry {
    double sq_dist;
    Index index;

    bool operator<(const Entry &o) const noexcept {
        return sq_dist < o.sq_dist || (sq_dist == o.sq_dist && index < o.index);
    }
};

struct CoordsSoA {
    std::vector<double> x, y, z;

    explicit CoordsSoA(const PointCloud &cloud) : x(cloud.size()), y(cloud.size()), z(cloud.size()) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            x[i] = cloud[i].x;
            y[i] = cloud[i].y;
            z[i] = cloud[i].z;
        }
    }
    double sq(std::size_t i, std::size_t j) const noexcept {
        const double dx = x[i] - x[j], dy = y[i] - y[j], dz = z[i] - z[j];
        return dx * dx + dy * dy + dz * dz;
    }
};

struct PairBuffer {
    std::vector<PairRecord> pairs;
    std::uint64_t evaluations = 0;
};

// Rows are dealt out in blocks, round-robin, so triangular work balances.
void collect_all_pairs(const CoordsSoA &soa, double radius, unsigned threads, std::vector<PairBuffer> &buffers) {
    const std::size_t n = soa.x.size();
    constexpr std::size_t kBlock = 64;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    buffers.assign(std::min<std::size_t>(threads, std::max<std::size_t>(blocks, 1)), {});
    const double r2 = radius * radius;
    parallel_chunks(buffers.size(), static_cast<unsigned>(buffers.size()), [&](std::size_t t, std::size_t, std::size_t) {
        auto &buf = buffers[t];
        for (std::size_t blk = t; blk < blocks; blk += buffers.size()) {
            const std::size_t end = std::min(n, (blk + 1) * kBlock);
            for (std::size_t i = blk * kBlock; i < end; ++i) {
                const double px = soa.x[i], py = soa.y[i], pz = soa.z[i];
                const double *xs = soa.x.data(), *ys = soa.y.data(), *zs = soa.z.data();
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double dx = xs[j] - px, dy = ys[j] - py, dz = zs[j] - pz;
                    const double d = dx * dx + dy * dy + dz * dz;
                    if (d < r2) buf.pairs.push_back({static_cast<Index>(i), static_cast<Index>(j), d});
                }
                buf.evaluations += n - i - 1;
            }
        }
    });
}

void collect_cell_pairs(const PointCloud &cloud, const CoordsSoA &soa, double radius, unsigned threads,
                        std::vector<PairBuffer> &buffers) {
    const std::size_t n = cloud.size();
    const auto [lo, hi] = cloud.bounds();
    const double ext[3] = {double(hi.x) - lo.x, double(hi.y) - lo.y, double(hi.z) - lo.z};

    // Cell edge >= radius keeps every within-radius pair in adjacent cells; grow
    // it when the grid would be much larger than the cloud.
    double cell = radius;
    std::int64_t dims[3];
    const double max_cells = 4.0 * static_cast<double>(n) + 64.0;
    for (;;) {
        double total = 1.0;
        for (int k = 0; k < 3; ++k) {
            const double d = std::floor(ext[k] / cell) + 1.0;
            total *= d;
            dims[k] = d > 1e6 ? std::int64_t{1000000} : static_cast<std::int64_t>(d);
        }
        if (total <= max_cells) break;
        cell *= std::max(1.01, std::cbrt(total / max_cells));
    }

    const auto cell_of = [&](std::size_t i) {
        auto c = [&](double v, double l, std::int64_t d) {
            return std::min<std::int64_t>(d - 1, static_cast<std::int64_t>((v - l) / cell));
        };
        return std::array<std::int64_t, 3>{c(soa.x[i], lo.x, dims[0]), c(soa.y[i], lo.y, dims[1]),
                                           c(soa.z[i], lo.z, dims[2])};
    };
    const auto linear = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) {
        return static_cast<std::size_t>((cz * dims[1] + cy) * dims[0] + cx);
    };
    const std::size_t n_cells = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);

    std::vector<std::size_t> cell_start(n_cells + 1, 0);
    std::vector<std::size_t> point_cell(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = cell_of(i);
        point_cell[i] = linear(c[0], c[1], c[2]);
        ++cell_start[point_cell[i] + 1];
    }
    std::partial_sum(cell_start.begin(), cell_start.end(), cell_start.begin());
    std::vector<Index> members(n);
    {
        std::vector<std::size_t> cursor(cell_start.begin(), cell_start.end() - 1);
        for (std::size_t i = 0; i < n; ++i) members[cursor[point_cell[i]]++] = static_cast<Index>(i);
    }

    // The 13 "forward" neighbor offsets: each unordered cell pair is visited once.
    std::vector<std::array<std::int64_t, 3>> forward;
    for (std::int64_t dz = -1; dz <= 1; ++dz) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                if (dz > 0 || (dz == 0 && (dy > 0 || (dy == 0 && dx > 0)))) forward.push_back({dx, dy, dz});
            }
        }
    }

    const double r2 = radius * radius;
    buffers.assign(std::max(1u, threads), {});
    parallel_chunks(n_cells, threads, [&](std::size_t t, std::size_t cb, std::size_t ce) {
        auto &buf = buffers[t];
        for (std::size_t c = cb; c < ce; ++c) {
            const std::size_t b0 = cell_start[c], e0 = cell_start[c + 1];
            if (b0 == e0) continue;
            const auto cx = static_cast<std::int64_t>(c % dims[0]);
            const auto cy = static_cast<std::int64_t>((c / dims[0]) % dims[1]);
            const auto cz = static_cast<std::int64_t>(c / (dims[0] * dims[1]));
            for (std::size_t a = b0; a < e0; ++a) {
                for (std::size_t b = a + 1; b < e0; ++b) {
                    const double d = soa.sq(members[a], members[b]);
                    if (d < r2) buf.pairs.push_back({members[a], members[b], d});
                }
            }
            buf.evaluations += (e0 - b0) * (e0 - b0 - 1) / 2;
            for (const auto &off : forward) {
                const std::int64_t nx = cx + off[0], ny = cy + off[1], nz = cz + off[2];
                if (nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] || ny >= dims[1] || nz >= dims[2]) continue;
                const std::size_t nc = linear(nx, ny, nz);
                const std::size_t b1 = cell_start[nc], e1 = cell_start[nc + 1];
                for (std::size_t a = b0; a < e0; ++a) {
                    for (std::size_t b = b1; b < e1; ++b) {
                        const double d = soa.sq(members[a], members[b]);
                        if (d < r2) buf.pairs.push_back({members[a], members[b], d});
                    }
                }
                buf.evaluations += (e0 - b0) * (e1 - b1);
            }
        }
    });
}

}  // namespace

class ExclusionBuilder {
public:
    static ExclusionLists build(const PointCloud &cloud, const SegmentedThresholds &thresholds,
                                std::span<const double> extra_radii, ExclusionBuild mode, unsigned threads) {
        if (thresholds.radii.empty()) throw std::invalid_argument("build_exclusion_lists: no thresholds");
        ExclusionLists out;
        out.level_radii_ = thresholds.radii;
        out.level_radii_.insert(out.level_radii_.end(), extra_radii.begin(), extra_radii.end());
        out.segment_levels_ = thresholds.radii.size();
        for (double r : out.level_radii_) {
            if (!(r > 0.0) || !std::isfinite(r)) {
                throw std::invalid_argument("build_exclusion_lists: radii must be positive and finite");
            }
        }
        out.max_radius_ = *std::max_element(out.level_radii_.begin(), out.level_radii_.end());

        threads = resolve_threads(threads);
        const std::size_t n = cloud.size();
        const CoordsSoA soa(cloud);
        std::vector<PairBuffer> buffers;
        if (mode == ExclusionBuild::kAllPairs) {
            collect_all_pairs(soa, out.max_radius_, threads, buffers);
        } else {
            collect_cell_pairs(cloud, soa, out.max_radius_, threads, buffers);
        }

        // Every point is its own neighbor; the self distance counts as one
        // evaluation.
        std::uint64_t evaluations = 0;
        std::vector<std::size_t> degree(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = soa.sq(i, i);
            ++evaluations;
            if (d < out.max_radius_ * out.max_radius_) ++degree[i + 1];
        }
        for (const auto &buf : buffers) {
            evaluations += buf.evaluations;
            for (const auto &rec : buf.pairs) {
                ++degree[rec.a + 1];
                ++degree[rec.b + 1];
            }
        }
        out.distance_evaluations_ = evaluations;
        DistanceCounter::add(evaluations);

        out.offsets_.resize(n + 1);
        std::partial_sum(degree.begin(), degree.end(), out.offsets_.begin());
        std::vector<Entry> entries(out.offsets_.back());
        {
            std::vector<std::size_t> cursor(out.offsets_.begin(), out.offsets_.end() - 1);
            for (std::size_t i = 0; i < n; ++i) entries[cursor[i]++] = {0.0, static_cast<Index>(i)};
            for (auto &buf : buffers) {
                for (const auto &rec : buf.pairs) {
                    entries[cursor[rec.a]++] = {rec.sq_dist, rec.b};
                    entries[cursor[rec.b]++] = {rec.sq_dist, rec.a};
                }
                buf.pairs = {};
            }
        }

        const std::size_t levels = out.level_radii_.size();
        out.neighbors_.resize(entries.size());
        out.sq_dists_.resize(entries.size());
        out.level_counts_.resize(n * levels);
        parallel_for(n, threads, [&](std::size_t i) {
            const auto b = entries.begin() + static_cast<std::ptrdiff_t>(out.offsets_[i]);
            const auto e = entries.begin() + static_cast<std::ptrdiff_t>(out.offsets_[i + 1]);
            std::sort(b, e);
            for (auto it = b; it != e; ++it) {
                const auto k = static_cast<std::size_t>(it - entries.begin());
                out.neighbors_[k] = it->index;
                out.sq_dists_[k] = it->sq_dist;
            }
            for (std::size_t l = 0; l < levels; ++l) {
                const double r = out.level_radii_[l];
                const auto first_out =
                    std::partition_point(b, e, [r](const Entry &en) { return within_radius(en.sq_dist, r); });
                out.level_counts_[i * levels + l] = static_cast<Index>(first_out - b);
            }
        });
        out.near_complete_ = 2 * entries.size() > n * n;
        return out;
    }
};

std::optional<std::size_t> ExclusionLists::level_of_radius(double r) const noexcept {
    for (std::size_t l = 0; l < level_radii_.size(); ++l) {
        if (level_radii_[l] == r) return l;
    }
    return std::nullopt;
}

ExclusionLists build_exclusion_lists(const PointCloud &cloud, const SegmentedThresholds &thresholds,
                                     std::span<const double> extra_radii, ExclusionBuild build, unsigned threads) {
    return ExclusionBuilder::build(cloud, thresholds, extra_radii, build, threads);
}

bool clamp_degenerate_radii(SegmentedThresholds &thresholds) {
    bool clamped = false;
    for (double &r : thresholds.radii) {
        if (!(r > 0.0)) {
            r = min_positive_radius();
            clamped = true;
        }
    }
    return clamped;
}

// ---------------------------------------------------------------------------

SegmentBitmap::SegmentBitmap(std::size_t bits)
    : bits_(bits),
      count_(bits),
      words_((bits + 63) / 64, ~std::uint64_t{0}),
      block_counts_((words_.size() + kWordsPerBlock - 1) / kWordsPerBlock, 0) {
    if (bits % 64 != 0) words_.back() = (std::uint64_t{1} << (bits % 64)) - 1;
    for (std::size_t w = 0; w < words_.size(); ++w) {
        block_counts_[w / kWordsPerBlock] += static_cast<std::uint32_t>(std::popcount(words_[w]));
    }
}

bool SegmentBitmap::clear(std::size_t i) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    std::uint64_t &w = words_[i >> 6];
    if (!(w & mask)) return false;
    w &= ~mask;
    --block_counts_[(i >> 6) / kWordsPerBlock];
    --count_;
    return true;
}

std::size_t SegmentBitmap::select(std::size_t rank) const noexcept {
    std::size_t block = 0;
    while (rank >= block_counts_[block]) rank -= block_counts_[block++];
    std::size_t w = block * kWordsPerBlock;
    for (;; ++w) {
        const auto pc = static_cast<std::size_t>(std::popcount(words_[w]));
        if (rank < pc) break;
        rank -= pc;
    }
    std::uint64_t word = words_[w];
    for (; rank > 0; --rank) word &= word - 1;
    return w * 64 + static_cast<std::size_t>(std::countr_zero(word));
}

// ---------------------------------------------------------------------------

PredictedSampling sample_with_predicted_distance(const PointCloud &cloud, std::size_t n,
                                                 const SampleResult &prefix_result, const ExclusionLists &excl,
                                                 const SegmentedThresholds &thresholds, Rng &rng, PickMode pick) {
    const std::size_t n_points = cloud.size();
    const std::size_t nseg = thresholds.segments();
    if (excl.size() != n_points) throw std::invalid_argument("sample_with_predicted_distance: lists/cloud mismatch");
    if (excl.segment_levels() != nseg) {
        throw std::invalid_argument("sample_with_predicted_distance: lists built for a different segment count");
    }
    if (n > n_points) throw std::invalid_argument("sample_with_predicted_distance: n exceeds cloud size");
    if (prefix_result.indices.empty()) throw std::invalid_argument("sample_with_predicted_distance: empty prefix");

    PredictedSampling out;
    out.partial = prefix_result;
    out.partial.indices.reserve(n);
    out.sample_segment.assign(prefix_result.indices.size(), 0);

    // Segment s (1-based) spans iterations [floor(n(s-1)/nseg), floor(n s/nseg)).
    auto segment_of = [&](std::size_t iteration) {
        std::size_t s = 1;
        while (s < nseg && iteration >= n * s / nseg) ++s;
        return s;
    };

    std::vector<SegmentBitmap> bitmaps(nseg, SegmentBitmap(n_points));
    auto exclude = [&](Index p, std::size_t from_segment) {
        const auto list = excl.neighbors(p);
        for (std::size_t s = from_segment; s <= nseg; ++s) {
            auto &bm = bitmaps[s - 1];
            const std::size_t cnt = excl.count(p, s - 1);
            for (std::size_t k = 0; k < cnt; ++k) bm.clear(list[k]);
        }
    };

    std::size_t seg = segment_of(out.partial.indices.size());
    for (Index p : prefix_result.indices) exclude(p, seg);

    std::size_t last_entered = 0;
    for (std::size_t i = out.partial.indices.size(); i < n; ++i) {
        seg = std::max(seg, segment_of(i));
        while (seg <= nseg && bitmaps[seg - 1].count() == 0) ++seg;
        if (seg > nseg) {
            out.seg_exhausted = true;
            break;
        }
        auto &bm = bitmaps[seg - 1];
        const std::size_t chosen =
            pick == PickMode::kRandom ? bm.select(static_cast<std::size_t>(rng.uniform_index(bm.count())))
                                      : bm.find_first();
        const auto idx = static_cast<Index>(chosen);
        out.partial.indices.push_back(idx);
        out.sample_segment.push_back(static_cast<std::uint32_t>(seg));
        if (seg != last_entered) {
            ++out.segments_entered;
            last_entered = seg;
        }
        exclude(idx, seg);
    }
    out.last_index_reached = out.partial.indices.size();
    return out;
}

SampleResult early_termination(const PointCloud &cloud, std::size_t n, const SampleResult &partial,
                               const ExclusionLists &excl, unsigned threads) {
    const std::size_t k = partial.indices.size();
    if (k >= n) return partial;
    if (n > cloud.size()) throw std::invalid_argument("early_termination: n exceeds cloud size");
    if (excl.size() != cloud.size()) throw std::invalid_argument("early_termination: lists/cloud mismatch");
    if (k == 0) throw std::invalid_argument("early_termination: empty partial sample");

    FpsState state;
    state.min_dists.assign(cloud.size(), kInfinity);
    state.taken.assign(cloud.size(), false);
    state.sampled = partial.indices;
    state.sampled.reserve(n);
    for (Index s : partial.indices) state.taken[s] = true;

    // Lists are sorted by distance, so the first sampled entry is the nearest
    // sampled point within R_1.
    parallel_for(cloud.size(), resolve_threads(threads), [&](std::size_t i) {
        const auto list = excl.neighbors(i, 0);
        const auto dists = excl.squared_distances(i);
        for (std::size_t e = 0; e < list.size(); ++e) {
            if (state.taken[list[e]]) {
                state.min_dists[i] = dists[e];
                break;
            }
        }
    });
    for (Index s : partial.indices) state.min_dists[s] = 0.0;
    state.pending = partial.indices.back();

    fps_advance(cloud, state, n, threads);

    SampleResult out;
    out.indices = std::move(state.sampled);
    out.method = partial.method;
    out.stats = partial.stats.value_or(SampleStats{});
    out.stats->early_term_iters = n - k;
    return out;
}

// ---------------------------------------------------------------------------

MdpsOutput mdps(const PointCloud &cloud, std::size_t n, const MdpsConfig &config) {
    if (n == 0 || n > cloud.size()) throw std::invalid_argument("mdps: sample count must be in [1, N]");
    if (config.seed_index >= cloud.size()) throw std::invalid_argument("mdps: seed index out of range");
    if (config.nseg == 0) throw std::invalid_argument("mdps: nseg must be at least 1");
    const auto start = Clock::now();
    const unsigned threads = resolve_threads(config.threads);
    const SampleMethod method = config.nseg == 1 ? SampleMethod::kSingleThreshold : SampleMethod::kMdps;

    MdpsOutput out;
    SampleStats stats;
    auto finish = [&](SampleResult result) {
        stats.times.total_ms = elapsed_ms(start);
        result.method = method;
        result.stats = stats;
        out.result = std::move(result);
        return std::move(out);
    };

    const std::size_t m = std::min(n, std::max<std::size_t>(2, prefix_length(n, config.p)));
    stats.fps_prefix_iters = m;

    // 1. Curve estimation: exact FPS prefix plus the estimator.
    auto t0 = Clock::now();
    if (m >= n) {
        auto full = fps(cloud, n, config.seed_index, threads);
        stats.times.curve_estimation_ms = elapsed_ms(t0);
        out.estimated = std::move(full.curve);
        return finish(std::move(full.result));
    }
    PrefixRun prefix;
    prefix.state = fps_init(cloud, config.seed_index);
    prefix.prefix.n_total = n;
    prefix.prefix.measured.push_back(kInfinity);
    fps_advance(cloud, prefix.state, m, threads, &prefix.prefix.measured);
    prefix.samples.indices = prefix.state.sampled;
    prefix.samples.method = method;

    const auto *oracle = std::get_if<OracleCurve>(&config.estimator);
    if (oracle && oracle->truth.values.empty()) {
        OracleCurve computed{oracle_estimator(cloud, n, config.seed_index, threads)};
        out.estimated = estimate_curve(computed, prefix.prefix);
    } else {
        out.estimated = estimate_curve(config.estimator, prefix.prefix);
    }
    stats.degenerate_curve = has_degenerate_tail(out.estimated, m);
    stats.times.curve_estimation_ms = elapsed_ms(t0);

    // 2. Segmentation and fused exclusion lists.
    t0 = Clock::now();
    out.thresholds = segment_thresholds(out.estimated, config.nseg);
    if (clamp_degenerate_radii(out.thresholds)) stats.degenerate_curve = true;
    out.exclusion = build_exclusion_lists(cloud, out.thresholds, config.extra_radii, config.build, threads);
    stats.times.segmentation_ms = elapsed_ms(t0);

    // 3. Sampling with the predicted distances.
    t0 = Clock::now();
    Rng rng(config.rng_seed);
    auto predicted =
        sample_with_predicted_distance(cloud, n, prefix.samples, out.exclusion, out.thresholds, rng, config.pick);
    stats.segments_entered = predicted.segments_entered;
    stats.times.sampling_ms = elapsed_ms(t0);

    // 4. Early termination.
    t0 = Clock::now();
    out.sample_segment = std::move(predicted.sample_segment);
    SampleResult result = std::move(predicted.partial);
    if (result.indices.size() < n) {
        stats.early_term_iters = n - result.indices.size();
        result = early_termination(cloud, n, result, out.exclusion, threads);
        out.sample_segment.resize(n, 0);
    }
    stats.times.early_termination_ms = elapsed_ms(t0);
    return finish(std::move(result));
}

}  // namespace mdps
