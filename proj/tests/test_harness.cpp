#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include "mdps/harness.hpp"

using namespace mdps;

TEST_CASE("generators are deterministic and respect their shapes") {
    for (auto family : {CloudFamily::kUniformBox, CloudFamily::kGaussianClusters, CloudFamily::kRoomSurfaces,
                        CloudFamily::kLidarRings}) {
        Rng a(3), b(3), c(4);
        const auto x = generate_cloud(family, 2000, a);
        const auto y = generate_cloud(family, 2000, b);
        const auto z = generate_cloud(family, 2000, c);
        CHECK(x.size() == 2000);
        CHECK(std::equal(x.points().begin(), x.points().end(), y.points().begin()));
        CHECK_FALSE(std::equal(x.points().begin(), x.points().end(), z.points().begin()));
        CHECK(parse_cloud_family(to_string(family)) == family);
    }

    Rng rng(1);
    const auto box = generate_cloud(CloudFamily::kUniformBox, 10000, rng);
    for (const auto &p : box.points()) {
        CHECK(p.x >= 0.0f);
        CHECK(p.x <= 1.0f);
        CHECK(p.y >= 0.0f);
        CHECK(p.y <= 1.0f);
        CHECK(p.z >= 0.0f);
        CHECK(p.z <= 1.0f);
    }

    Rng r2(1);
    CHECK_THROWS_AS(generate_cloud(CloudFamily::kUniformBox, 0, r2), std::invalid_argument);
    GeneratorParams bad;
    bad.clusters = 0;
    CHECK_THROWS_AS(generate_cloud(CloudFamily::kGaussianClusters, 10, r2, bad), std::invalid_argument);
    CHECK_THROWS_AS(parse_cloud_family("forest"), std::invalid_argument);
}

TEST_CASE("room points lie on the modelled planes") {
    Rng rng(2);
    GeneratorParams g;
    g.surface_noise = 0.0;
    const auto room = generate_cloud(CloudFamily::kRoomSurfaces, 5000, rng, g);
    for (const auto &p : room.points()) {
        const bool on_box = std::abs(p.x) < 1e-5 || std::abs(p.x - 6.0f) < 1e-5 || std::abs(p.y) < 1e-5 ||
                            std::abs(p.y - 5.0f) < 1e-5 || std::abs(p.z) < 1e-5 || std::abs(p.z - 3.0f) < 1e-5;
        const bool on_partition = std::abs(p.x - 3.6f) < 1e-5;
        const bool on_table = std::abs(p.z - 0.75f) < 1e-5;
        CHECK((on_box || on_partition || on_table));
    }
}

TEST_CASE("lidar area density falls with radius") {
    Rng rng(5);
    const auto cloud = generate_cloud(CloudFamily::kLidarRings, 64000, rng);
    // Annuli of width 4 rings each, density = count / area.
    std::vector<double> counts(8, 0.0);
    for (const auto &p : cloud.points()) {
        const double r = std::hypot(double(p.x), double(p.y));
        const auto bin = static_cast<std::size_t>((r - 1.5) / 4.0);
        if (bin < counts.size()) counts[bin] += 1.0;
    }
    double prev = kInfinity;
    for (std::size_t b = 0; b < counts.size(); ++b) {
        const double lo = 1.5 + 4.0 * b, hi = lo + 4.0;
        const double density = counts[b] / (hi * hi - lo * lo);
        CHECK(density < prev);
        prev = density;
    }
}

TEST_CASE("bench config parsing") {
    testing::TempDir dir("harness");
    {
        std::ofstream(dir / "c.json") << R"({"clouds":[{"family":"room-surfaces","n":3000,"seed":4}],
            "methods":[{"method":"fps"},{"method":"mdps","estimator":"power","nseg":3,"p":0.2,
                        "exclusion_build":"grid"},{"method":"single-threshold"}],
            "stride":4,"repetitions":2,"warmup":0,"threads":1})";
    }
    const auto c = load_bench_config(dir / "c.json");
    REQUIRE(c.clouds.size() == 1);
    CHECK(c.clouds[0].family == CloudFamily::kRoomSurfaces);
    CHECK(c.clouds[0].n == 3000);
    REQUIRE(c.methods.size() == 3);
    CHECK(c.methods[1].estimator == EstimatorKind::kPower);
    CHECK(c.methods[1].nseg == 3);
    CHECK(c.methods[1].p == 0.2);
    CHECK(c.methods[1].build == ExclusionBuild::kCellGrid);
    CHECK(c.methods[2].nseg == 1);
    CHECK(c.repetitions == 2);

    {
        std::ofstream(dir / "bad.json") << R"({"clouds":[{"family":"uniform-box"}],"methods":[{"method":"fps"}],
            "repetitions":0})";
    }
    CHECK_THROWS_AS(load_bench_config(dir / "bad.json"), std::invalid_argument);
    {
        std::ofstream(dir / "bad.json") << R"({"clouds":[{"family":"uniform-box"}],"methods":[{"method":"fps"}],
            "stride":1})";
    }
    CHECK_THROWS_AS(load_bench_config(dir / "bad.json"), std::invalid_argument);
    {
        std::ofstream(dir / "bad.json") << "{not json";
    }
    CHECK_THROWS(load_bench_config(dir / "bad.json"));
    CHECK_THROWS(load_bench_config(dir / "missing.json"));
}

TEST_CASE("bench run and report schema") {
    BenchConfig c;
    c.clouds = {{CloudFamily::kUniformBox, 2000, 1}};
    MethodSpec fps_spec, mdps_spec, power_spec;
    mdps_spec.method = SampleMethod::kMdps;
    power_spec.method = SampleMethod::kMdps;
    power_spec.estimator = EstimatorKind::kPower;
    MethodSpec random_spec, grid_spec;
    random_spec.method = SampleMethod::kRandom;
    grid_spec.method = SampleMethod::kGrid;
    c.methods = {fps_spec, mdps_spec, power_spec, random_spec, grid_spec};
    c.repetitions = 1;
    c.warmup = 0;
    c.threads = 2;
    c.training_clouds = 2;

    const auto report = run_bench(c);
    // fps, random, grid: 1 row; mdps variants: total + 4 stages.
    CHECK(report.rows.size() == 3 + 2 * 5);
    for (const auto &row : report.rows) {
        CHECK(row.family == "uniform-box");
        CHECK(row.n_points == 2000);
        CHECK(row.threads == 2);
        CHECK(row.time_ms_min <= row.time_ms_median);
        if (row.method == "fps") CHECK(row.quality_ratio_pct == 100.0);
        if (row.method == "mdps") CHECK(row.quality_ratio_pct > 90.0);
    }

    const auto again = run_bench(c);
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
        CHECK(again.rows[k].quality_ratio_pct == report.rows[k].quality_ratio_pct);
        CHECK(again.rows[k].early_term_frac == report.rows[k].early_term_frac);
    }

    testing::TempDir dir("harness");
    write_bench_csv(report, dir / "b.csv");
    write_bench_json(report, dir / "b.json");
    std::ifstream csv(dir / "b.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "family,N,method,estimator,nseg,p,threads,stage,time_ms_median,time_ms_min,quality_ratio_pct,"
          "early_term_frac,fallback_count");
    std::size_t lines = 0;
    for (std::string line; std::getline(csv, line);) {
        CHECK(std::count(line.begin(), line.end(), ',') == 12);
        ++lines;
    }
    CHECK(lines == report.rows.size());
    std::ifstream js(dir / "b.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j["rows"].size() == report.rows.size());
    CHECK(j["rows"][0].contains("time_ms_median"));

    CHECK_THROWS_AS(write_bench_csv(report, dir / "no" / "such" / "dir.csv"), std::runtime_error);
}

TEST_CASE("ablation over p") {
    Rng rng(9);
    const auto cloud = generate_cloud(CloudFamily::kUniformBox, 3000, rng);
    MdpsConfig base;
    const auto r = ablation_p(cloud, 750, base, {0.2, 0.05, 0.1});
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].p == 0.05);
    CHECK(r.rows[2].p == 0.2);
    CHECK(r.rows[2].quality_ratio_pct >= r.rows[0].quality_ratio_pct - 1.0);
    CHECK(r.monotone_within_margin);

    const auto lim = ablation_p(cloud, 750, base, {0.05, 0.99});
    CHECK(lim.rows[1].quality_ratio_pct >= lim.rows[0].quality_ratio_pct);

    const auto s = ablation_nseg(cloud, 750, base, {1, 6});
    REQUIRE(s.rows.size() == 2);
    CHECK(s.rows[1].quality_ratio_pct >= s.rows[0].quality_ratio_pct - 0.2);
}

TEST_CASE("sample stats file") {
    testing::TempDir dir("harness");
    SampleResult r;
    r.method = SampleMethod::kMdps;
    r.indices = {0, 1, 2};
    SampleStats st;
    st.fps_prefix_iters = 1;
    st.times.sampling_ms = 2.5;
    r.stats = st;
    save_sample_stats(r, dir / "s.json");
    std::ifstream in(dir / "s.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j["method"] == "mdps");
    CHECK(j["fps_prefix_iters"] == 1);
    CHECK(j["stage_ms"]["sampling"] == 2.5);
    for (const char *k : {"curve_estimation", "segmentation", "sampling", "early_termination"}) {
        CHECK(j["stage_ms"].contains(k));
    }
}
