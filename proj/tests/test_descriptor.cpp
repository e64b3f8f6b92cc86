#include <array>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "reid/dataset.hpp"
#include "reid/descriptor.hpp"
#include "reid/image.hpp"

using namespace reid;

namespace {

Image solid_image(int h, int w, uint8_t r, uint8_t g, uint8_t b) {
    Image img(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    }
    return img;
}

Image mirrored(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
            }
        }
    }
    return out;
}

Image sample_image() {
    SyntheticSpec spec;
    spec.num_identities = 2;
    spec.records_per_identity = 2;
    spec.num_cameras = 2;
    ImageCorpus corpus = generate_synthetic_images(spec, 64, 32, 77);
    return corpus.images.front();
}

double l2_norm(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TEST_CASE("hsv conversion matches hexcone reference points") {
    Hsv red = rgb_to_hsv(255, 0, 0);
    CHECK(red.h == doctest::Approx(0.0));
    CHECK(red.s == doctest::Approx(1.0));
    CHECK(red.v == doctest::Approx(1.0));

    Hsv green = rgb_to_hsv(0, 255, 0);
    CHECK(green.h == doctest::Approx(120.0));

    Hsv blue = rgb_to_hsv(0, 0, 255);
    CHECK(blue.h == doctest::Approx(240.0));

    Hsv gray = rgb_to_hsv(128, 128, 128);
    CHECK(gray.h == 0.0);
    CHECK(gray.s == 0.0);
    CHECK(gray.v == doctest::Approx(128.0 / 255.0));

    Hsv black = rgb_to_hsv(0, 0, 0);
    CHECK(black.s == 0.0);
    CHECK(black.v == 0.0);

    Hsv olive = rgb_to_hsv(128, 128, 0);
    CHECK(olive.h == doctest::Approx(60.0));
    CHECK(olive.s == doctest::Approx(1.0));
    CHECK(olive.v == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("hue stays inside [0, 360)") {
    for (int r = 0; r < 256; r += 51) {
        for (int g = 0; g < 256; g += 51) {
            for (int b = 0; b < 256; b += 51) {
                Hsv hsv = rgb_to_hsv(static_cast<uint8_t>(r), static_cast<uint8_t>(g),
                                     static_cast<uint8_t>(b));
                REQUIRE(hsv.h >= 0.0);
                REQUIRE(hsv.h < 360.0);
                REQUIRE(hsv.s >= 0.0);
                REQUIRE(hsv.s <= 1.0);
            }
        }
    }
}

TEST_CASE("texture code hits known words") {
    std::array<double, 9> uniform{};
    uniform.fill(0.5);
    CHECK(local_texture_code(uniform, 0.03) == 0);

    std::array<double, 9> all_above{};
    all_above.fill(1.0);
    all_above[4] = 0.0;
    // every neighbor digit is 1: sum of 3^k over k = 0..7
    CHECK(local_texture_code(all_above, 0.03) == 3280);

    std::array<double, 9> all_below{};
    all_below.fill(0.0);
    all_below[4] = 1.0;
    CHECK(local_texture_code(all_below, 0.03) == 2 * 3280);

    // a huge threshold flattens every comparison
    CHECK(local_texture_code(all_above, 1.0) == 0);

    // only the top-left neighbor above: first clockwise digit, weight 3^0
    std::array<double, 9> one{};
    one.fill(0.5);
    one[0] = 1.0;
    CHECK(local_texture_code(one, 0.03) == 1);

    // only the top-center neighbor above: second clockwise digit, weight 3^1
    std::array<double, 9> two{};
    two.fill(0.5);
    two[1] = 1.0;
    CHECK(local_texture_code(two, 0.03) == 3);
}

TEST_CASE("texture fold lands in 81 bins and is mirror invariant") {
    for (int code = 0; code < 6561; code += 17) {
        int folded = fold_texture_code(code);
        REQUIRE(folded >= 0);
        REQUIRE(folded < 81);
    }
    CHECK_THROWS_AS(fold_texture_code(-1), UsageError);
    CHECK_THROWS_AS(fold_texture_code(6561), UsageError);

    Rng rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<double, 9> w{};
        for (auto& x : w) x = rng.uniform();
        std::array<double, 9> m = {w[2], w[1], w[0], w[5], w[4],
                                   w[3], w[8], w[7], w[6]};
        int a = fold_texture_code(local_texture_code(w, 0.03));
        int b = fold_texture_code(local_texture_code(m, 0.03));
        CHECK(a == b);
    }
}

TEST_CASE("descriptor dimension follows the configuration") {
    DescriptorConfig cfg;
    CHECK(cfg.stripe_dim() == 593);
    CHECK(cfg.descriptor_dim() == 4744);

    DescriptorConfig tiny;
    tiny.num_stripes = 2;
    tiny.hue_bins = 4;
    tiny.sat_bins = 2;
    tiny.val_bins = 2;
    CHECK(tiny.descriptor_dim() == 2 * (16 + 81));

    Image img = sample_image();
    CHECK(extract_handcrafted(img, cfg).size() == 4744);
}

TEST_CASE("descriptor is unit length and non-negative") {
    DescriptorConfig cfg;
    std::vector<double> d = extract_handcrafted(sample_image(), cfg);
    CHECK(l2_norm(d) == doctest::Approx(1.0).epsilon(1e-12));
    for (double x : d) REQUIRE(x >= 0.0);
}

TEST_CASE("descriptor is deterministic") {
    DescriptorConfig cfg;
    Image img = sample_image();
    CHECK(extract_handcrafted(img, cfg) == extract_handcrafted(img, cfg));
}

TEST_CASE("descriptor is invariant to horizontal mirroring") {
    DescriptorConfig cfg;
    Image img = sample_image();
    // max pooling over sliding positions needs the window tiling to mirror
    // onto itself: width 32, subwindow 10, stride 11 puts windows at 0 and 22
    cfg.subwindow_stride = 11;
    std::vector<double> a = extract_handcrafted(img, cfg);
    std::vector<double> b = extract_handcrafted(mirrored(img), cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("solid colors land their mass in one hsv bin per stripe") {
    DescriptorConfig cfg;
    cfg.num_stripes = 2;
    Image img = solid_image(24, 16, 255, 0, 0);
    std::vector<double> d = extract_handcrafted(img, cfg);
    size_t color_bins = cfg.hue_bins * cfg.sat_bins * cfg.val_bins;
    for (size_t s = 0; s < 2; ++s) {
        size_t base = s * cfg.stripe_dim();
        size_t nonzero = 0;
        for (size_t i = 0; i < color_bins; ++i) {
            if (d[base + i] > 0) ++nonzero;
        }
        CHECK(nonzero == 1);
    }
}

TEST_CASE("images smaller than the window are rejected with dimensions") {
    DescriptorConfig cfg;
    Image img = solid_image(40, 8, 10, 20, 30);
    try {
        extract_handcrafted(img, cfg);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("8") != std::string::npos);
        CHECK(msg.find("10") != std::string::npos);
    }

    Image short_img = solid_image(4, 16, 10, 20, 30);
    CHECK_THROWS_AS(extract_handcrafted(short_img, cfg), ShapeError);
}

TEST_CASE("descriptor configuration validation") {
    DescriptorConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.num_stripes = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DescriptorConfig{};
    cfg.subwindow_stride = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DescriptorConfig{};
    cfg.texture_threshold = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DescriptorConfig{};
    cfg.hue_bins = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("ppm round-trip preserves pixels") {
    Image img = solid_image(6, 5, 1, 128, 255);
    img.at(2, 3, 0) = 77;
    auto dir = std::filesystem::temp_directory_path() / "reid_descriptor_tests";
    std::filesystem::create_directories(dir);
    auto path = dir / "img.ppm";
    write_ppm(img, path);
    Image back = read_ppm(path);
    CHECK(back.height == 6);
    CHECK(back.width == 5);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("corpus round-trip preserves labels and image count") {
    SyntheticSpec spec;
    spec.num_identities = 3;
    spec.records_per_identity = 2;
    spec.num_cameras = 2;
    ImageCorpus corpus = generate_synthetic_images(spec, 16, 12, 9);
    REQUIRE(corpus.size() == 6);
    auto dir = std::filesystem::temp_directory_path() / "reid_corpus_tests";
    std::filesystem::remove_all(dir);
    save_corpus(corpus, dir);
    ImageCorpus back = load_corpus(dir);
    REQUIRE(back.size() == corpus.size());
    CHECK(back.ids == corpus.ids);
    CHECK(back.cameras == corpus.cameras);
    for (size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back.images[i].pixels == corpus.images[i].pixels);
    }
}
