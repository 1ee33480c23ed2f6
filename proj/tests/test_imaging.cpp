#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "flip/data.hpp"
#include "flip/image.hpp"
#include "flip/phantom.hpp"
#include "flip/rng.hpp"

using namespace flip;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

PhantomSpec centered_ellipse_64() {
    PhantomSpec s;
    s.canvas_w = s.canvas_h = 64;
    s.cx = s.cy = 32.0;
    s.rx = 10.0;
    s.ry = 8.0;
    s.family = PhantomSpec::Family::Ellipse;
    s.seed = 3;
    return s;
}

}  // namespace

TEST_CASE("ellipse bbox geometry: radii (10,8), margin 4 -> 28x24 around centre") {
    const auto ph = generate_phantom(centered_ellipse_64());
    CHECK(ph.box.w == 28);
    CHECK(ph.box.h == 24);
    CHECK(ph.box.x0 == 18);
    CHECK(ph.box.y0 == 20);
    CHECK(ph.box.x0 + ph.box.w / 2 == 32);
}

TEST_CASE("phantom generation is deterministic given the spec") {
    const auto a = generate_phantom(centered_ellipse_64());
    const auto b = generate_phantom(centered_ellipse_64());
    CHECK(a.image.data == b.image.data);
    CHECK(a.mask.data == b.mask.data);
    CHECK(a.box == b.box);
}

TEST_CASE("phantom contrast statistic and mask-inside-bbox over random specs") {
    Rng rng(77);
    double rel_err_sum = 0;
    int n = 0;
    for (int t = 0; t < 200; ++t) {
        PhantomSpec s;
        s.canvas_w = s.canvas_h = 96;
        s.family = rng.uniform() < 0.5 ? PhantomSpec::Family::Ellipse : PhantomSpec::Family::Lobulated;
        s.cx = rng.uniform(36, 60);
        s.cy = rng.uniform(36, 60);
        s.rx = rng.uniform(8, 14);
        s.ry = rng.uniform(8, 14);
        s.mean_bg = rng.uniform(120, 180);
        s.mean_fg = rng.uniform(40, s.mean_bg - 50);
        s.speckle_sigma = rng.uniform(0.05, 0.12);
        s.seed = rng.next();
        const auto ph = generate_phantom(s);

        double fg = 0, bg = 0;
        long nfg = 0, nbg = 0;
        for (int y = 0; y < 96; ++y)
            for (int x = 0; x < 96; ++x) {
                if (ph.mask.at(x, y)) {
                    fg += ph.image.at(x, y);
                    ++nfg;
                } else {
                    bg += ph.image.at(x, y);
                    ++nbg;
                }
                if (ph.mask.at(x, y)) {
                    REQUIRE(ph.box.contains(x, y));
                }
            }
        const double measured = std::abs(fg / nfg - bg / nbg);
        const double configured = std::abs(s.mean_fg - s.mean_bg);
        rel_err_sum += std::abs(measured - configured) / configured;
        ++n;
    }
    CHECK(rel_err_sum / n < 0.10);
}

TEST_CASE("phantom rejections") {
    auto s = centered_ellipse_64();
    s.rx = 40.0;  // touches the canvas edge
    CHECK_THROWS_AS(generate_phantom(s), DataError);

    auto c = centered_ellipse_64();
    c.mean_fg = c.mean_bg = 100.0;  // below min contrast
    CHECK_THROWS_AS(generate_phantom(c), ParamError);
}

TEST_CASE("PGM round-trip is the identity on random images") {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        GrayImage img(rng.uniform_int(1, 40), rng.uniform_int(1, 40));
        for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        const GrayImage back = decode_pgm(encode_pgm(img));
        REQUIRE(back.width == img.width);
        REQUIRE(back.height == img.height);
        REQUIRE(back.data == img.data);
    }
}

TEST_CASE("PGM format errors") {
    CHECK_THROWS_AS(decode_pgm("P5\n2 2\n65535\n\0\0\0\0"), FormatError);
    CHECK_THROWS_AS(decode_pgm("P6\n2 2\n255\n...."), FormatError);
    CHECK_THROWS_AS(decode_pgm("P5\n4 4\n255\nxx"), FormatError);  // truncated payload
    try {
        decode_pgm("P5\n4 4\n255\nxx");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset > 0);  // byte offset reported
    }
}

TEST_CASE("3x2 image file size = header + 6 bytes") {
    GrayImage img(3, 2);
    for (int i = 0; i < 6; ++i) img.data[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i * 10);
    const std::string bytes = encode_pgm(img);
    CHECK(bytes.size() == 17);  // "P5\n3 2\n255\n" (11) + payload (6)
    CHECK(decode_pgm(bytes).data == img.data);
}

TEST_CASE("mask PGM uses {0,255} and rejects other values") {
    Mask m(4, 3);
    m.at(1, 1) = 1;
    m.at(2, 2) = 1;
    const std::string path = temp_path("flip_test_mask.pgm");
    save_mask(path, m);
    const Mask back = load_mask(path);
    CHECK(back.data == m.data);

    GrayImage bad(2, 2);
    bad.at(0, 0) = 7;
    const std::string bad_path = temp_path("flip_test_badmask.pgm");
    save_image(bad_path, bad);
    CHECK_THROWS_AS(load_mask(bad_path), FormatError);
    std::remove(path.c_str());
    std::remove(bad_path.c_str());
}

TEST_CASE("shift_box translation and clamping") {
    const BoundingBox b{10, 10, 20, 20};
    CHECK(shift_box(b, 0, 0, 64, 64) == b);
    CHECK(shift_box(b, 5, -3, 64, 64) == BoundingBox{15, 7, 20, 20});
    CHECK(shift_box(b, 1000, 0, 64, 64) == BoundingBox{44, 10, 20, 20});
    CHECK(shift_box(b, -1000, -1000, 64, 64) == BoundingBox{0, 0, 20, 20});
    // box larger than the image shrinks at the border
    CHECK(shift_box({0, 0, 100, 100}, 0, 0, 64, 64) == BoundingBox{0, 0, 64, 64});
}

TEST_CASE("dataset manifest round trip and errors") {
    std::vector<DatasetItem> items = {{"images/a.pgm", "masks/a.pgm", {1, 2, 20, 21}},
                                      {"images/b.pgm", "masks/b.pgm", {3, 4, 22, 23}}};
    const auto parsed = parse_dataset_manifest(encode_dataset_manifest(items));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].image_path == "images/a.pgm");
    CHECK(parsed[1].box == BoundingBox{3, 4, 22, 23});
    CHECK_THROWS_AS(parse_dataset_manifest("images/a.pgm masks/a.pgm 1 2"), DataError);
    CHECK_THROWS_AS(parse_dataset_manifest("a b c d e f"), DataError);
}
