#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "flip/harness.hpp"

using namespace flip;

namespace {

std::string temp_dir(const char* name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p.string();
}

std::vector<TraceRow> tiny_trace(int n) {
    std::vector<TraceRow> rows;
    for (int i = 1; i <= n; ++i)
        rows.push_back({i, (i - 1) % 2, i, Action::Erase, 1.0 / i, 2.0, 1.0, 10LL * i, 50.0 + i});
    return rows;
}

}  // namespace

TEST_CASE("box parsing") {
    CHECK(detail::parse_box("3 4 20 21") == BoundingBox{3, 4, 20, 21});
    CHECK(detail::parse_box("  3  4 20 21 ") == BoundingBox{3, 4, 20, 21});
    CHECK_THROWS_AS(detail::parse_box("3 4 20"), UsageError);
    CHECK_THROWS_AS(detail::parse_box("a b c d"), UsageError);
}

TEST_CASE("band parsing and scaling") {
    const auto bands = parse_bands("0-10,10-20,20-30");
    REQUIRE(bands.size() == 3);
    CHECK(bands[0] == std::pair{0.0, 10.0});
    CHECK(bands[2] == std::pair{20.0, 30.0});
    CHECK_THROWS_AS(parse_bands("5"), UsageError);
    CHECK_THROWS_AS(parse_bands("9-3"), UsageError);
    // proportional scaling to desk-sized canvases
    const double scale = 96.0 / 448.0;
    CHECK(bands[1].second * scale == Catch::Approx(20.0 * 96.0 / 448.0));
}

TEST_CASE("options round-trip through config maps; unknown keys rejected") {
    TrainAgentsOptions opt;
    opt.stage = 2;
    opt.data = "/tmp/x";
    opt.lr = 0.000123;
    opt.env.theta = 19.5;
    opt.prioritized = false;
    const auto m = cfg::to_config(opt);
    const auto back = cfg::from_config<TrainAgentsOptions>(m);
    CHECK(back.stage == 2);
    CHECK(back.data == "/tmp/x");
    CHECK(back.lr == opt.lr);
    CHECK(back.env.theta == 19.5);
    CHECK(back.prioritized == false);

    auto bad = m;
    bad["no_such_key"] = "1";
    CHECK_THROWS_AS(cfg::from_config<TrainAgentsOptions>(bad), UsageError);
    auto badv = m;
    badv["prioritized"] = "maybe";
    CHECK_THROWS_AS(cfg::from_config<TrainAgentsOptions>(badv), UsageError);
}

TEST_CASE("manifest json round trip and malformed input") {
    RunManifest m;
    m.command = "evaluate";
    m.config = {{"data", "/d"}, {"out", "/o"}};
    m.root_seed = 42;
    m.inputs = {"/d/test.txt"};
    m.input_hash = "fnv64:00000000deadbeef";
    m.outputs = {"metrics.csv"};
    m.created_at = "2026-01-01T00:00:00Z";
    const RunManifest back = decode_manifest(encode_manifest(m));
    CHECK(back.command == m.command);
    CHECK(back.config == m.config);
    CHECK(back.root_seed == 42);
    CHECK(back.outputs == m.outputs);
    CHECK_THROWS_AS(decode_manifest("{not json"), DataError);
    CHECK_THROWS_AS(decode_manifest("{\"command\": 3}"), DataError);
}

TEST_CASE("svg emission: deterministic, one-point polylines, beta line") {
    const auto rows = tiny_trace(1);
    const std::string a = emit_curves(rows, true, 0.05);
    const std::string b = emit_curves(rows, true, 0.05);
    CHECK(a == b);
    std::size_t polylines = 0, pos = 0;
    while ((pos = a.find("<polyline", pos)) != std::string::npos) {
        ++polylines;
        pos += 9;
    }
    CHECK(polylines == 3);
    CHECK(a.find("stroke-dasharray") != std::string::npos);
    CHECK(emit_curves(rows, false, 0.05).find("#e6b812") == std::string::npos);
    CHECK_THROWS_AS(emit_curves({}, true, 0.05), DataError);
}

TEST_CASE("gen-data writes a reproducible split dataset") {
    const std::string d1 = temp_dir("flip_gd1");
    const std::string d2 = temp_dir("flip_gd2");
    GenDataOptions opt;
    opt.out = d1;
    opt.groups = 6;
    opt.per_group = 2;
    opt.seed = 99;
    opt.threads = 2;
    const RunManifest man = run_gen_data(opt);
    CHECK(man.command == "gen-data");
    CHECK_FALSE(man.outputs.empty());

    const auto train = load_dataset(join_path(d1, "train.txt"));
    const auto val = load_dataset(join_path(d1, "val.txt"));
    const auto test = load_dataset(join_path(d1, "test.txt"));
    CHECK_FALSE(train.empty());
    CHECK_FALSE(val.empty());
    CHECK_FALSE(test.empty());
    CHECK(train.size() + val.size() + test.size() == 12);
    // groups never straddle splits: ids share the pNNN prefix within a group
    for (const auto& item : train)
        for (const auto& t : test) REQUIRE(item.id.substr(0, 4) != t.id.substr(0, 4));
    // masks live inside their boxes
    for (const auto& item : test)
        for (int y = 0; y < item.mask.height; ++y)
            for (int x = 0; x < item.mask.width; ++x)
                if (item.mask.at(x, y)) REQUIRE(item.box.contains(x, y));

    opt.out = d2;
    run_gen_data(opt);
    CHECK(read_file(join_path(d1, "train.txt")) == read_file(join_path(d2, "train.txt")));
    CHECK(read_file(join_path(d1, "images/p000_00.pgm")) ==
          read_file(join_path(d2, "images/p000_00.pgm")));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("manifest replay reproduces gen-data byte for byte") {
    const std::string d1 = temp_dir("flip_rp1");
    const std::string d2 = temp_dir("flip_rp2");
    GenDataOptions opt;
    opt.out = d1;
    opt.groups = 5;
    opt.per_group = 1;
    opt.seed = 123;
    run_gen_data(opt);
    const RunManifest man = run_from_manifest(join_path(d1, "manifest.json"), d2);
    CHECK(man.command == "gen-data");
    CHECK(read_file(join_path(d1, "dataset.txt")) == read_file(join_path(d2, "dataset.txt")));
    CHECK(read_file(join_path(d1, "images/p002_00.pgm")) ==
          read_file(join_path(d2, "images/p002_00.pgm")));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("curves command renders a trace csv") {
    const std::string dir = temp_dir("flip_curves");
    ensure_dir(dir);
    const std::string trace_path = join_path(dir, "trace.csv");
    write_file(trace_path, trace_csv(tiny_trace(5), true));
    CurvesOptions opt;
    opt.trace = trace_path;
    opt.out = join_path(dir, "curve.svg");
    run_curves(opt);
    const std::string svg = read_file(opt.out);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("missing artifacts raise MissingArtifact") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/train.txt"), MissingArtifact);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/q.ckpt"), MissingArtifact);
    CHECK_THROWS_AS(run_from_manifest("/nonexistent/manifest.json", ""), MissingArtifact);
}
