#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "cfsl/dataset.hpp"
#include "cfsl/error.hpp"

using namespace cfsl;
namespace fs = std::filesystem;

namespace {

std::set<std::string> ids(const ClassDataset& d) {
    std::set<std::string> out;
    for (const auto& c : d.classes) out.insert(c.class_id);
    return out;
}

}  // namespace

TEST_CASE("synthetic glyphs are deterministic, valid and quantized to 1/255") {
    const auto a = synth_generate(12, 5, 20, 3);
    const auto b = synth_generate(12, 5, 20, 3);
    CHECK(a == b);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(synth_generate(12, 5, 20, 4).fingerprint() != a.fingerprint());
    CHECK_NOTHROW(a.validate());
    CHECK(a.class_count() == 12);
    CHECK(a.sample_count() == 60);
    CHECK(a.image_shape() == std::pair{20, 20});
    for (const auto& c : a.classes) {
        for (const auto& s : c.samples) {
            for (float p : s.image.pixels) {
                const double q = p * 255.0;
                REQUIRE(std::abs(q - std::round(q)) < 1e-3);
            }
        }
    }
}

TEST_CASE("samples of one class look more alike than samples of different classes") {
    const auto d = synth_generate(10, 6, 28, 1);
    auto dist = [](const Image& x, const Image& y) {
        double s = 0;
        for (std::size_t i = 0; i < x.pixels.size(); ++i) s += (x.pixels[i] - y.pixels[i]) * (x.pixels[i] - y.pixels[i]);
        return s;
    };
    double within = 0, between = 0;
    int nw = 0, nb = 0;
    for (std::size_t c = 0; c < d.classes.size(); ++c) {
        for (std::size_t e = 0; e < d.classes.size(); ++e) {
            for (int i = 0; i < 6; ++i) {
                for (int j = i + 1; j < 6; ++j) {
                    const double v = dist(d.classes[c].samples[i].image, d.classes[e].samples[j].image);
                    if (c == e) {
                        within += v;
                        ++nw;
                    } else {
                        between += v;
                        ++nb;
                    }
                }
            }
        }
    }
    CHECK(within / nw < between / nb);
}

TEST_CASE("validate rejects structural problems") {
    auto d = synth_generate(3, 2, 8, 0);
    SUBCASE("duplicate class id") {
        d.classes[1].class_id = d.classes[0].class_id;
        CHECK_THROWS_AS(d.validate(), IngestionError);
    }
    SUBCASE("empty class") {
        d.classes[2].samples.clear();
        CHECK_THROWS_AS(d.validate(), IngestionError);
    }
    SUBCASE("shape mismatch") {
        d.classes[0].samples[0].image = Image(4, 4);
        CHECK_THROWS_AS(d.validate(), IngestionError);
    }
    SUBCASE("pixel outside [0,1]") {
        d.classes[0].samples[1].image.pixels[0] = 1.5f;
        CHECK_THROWS_AS(d.validate(), IngestionError);
    }
}

TEST_CASE("ratio split is disjoint, exhaustive, deterministic and order preserving") {
    const auto d = synth_generate(50, 2, 8, 0);
    for (std::int64_t seed = 0; seed < 20; ++seed) {
        SplitSpec s;
        s.seed = seed;
        s.background_fraction = 0.7;
        const auto sp = split_background_eval(d, s);
        CHECK(sp.background.class_count() == 35);
        CHECK(sp.evaluation.class_count() == 15);
        const auto bg = ids(sp.background), ev = ids(sp.evaluation);
        std::vector<std::string> both;
        std::set_intersection(bg.begin(), bg.end(), ev.begin(), ev.end(), std::back_inserter(both));
        CHECK(both.empty());
        CHECK(bg.size() + ev.size() == 50);
        CHECK(std::is_sorted(sp.background.classes.begin(), sp.background.classes.end(),
                             [](const auto& a, const auto& b) { return a.class_id < b.class_id; }));
        CHECK(split_background_eval(d, s).background == sp.background);
    }
}

TEST_CASE("explicit split lists") {
    const auto d = synth_generate(4, 1, 8, 0);
    SplitSpec s;
    s.mode = SplitSpec::Mode::explicit_lists;
    s.background_ids = {d.classes[0].class_id, d.classes[2].class_id};
    s.evaluation_ids = {d.classes[1].class_id, d.classes[3].class_id};
    const auto sp = split_background_eval(d, s);
    CHECK(ids(sp.background) == std::set<std::string>{d.classes[0].class_id, d.classes[2].class_id});

    auto bad = s;
    bad.evaluation_ids.push_back(d.classes[0].class_id);
    CHECK_THROWS_AS(split_background_eval(d, bad), SplitError);
    bad = s;
    bad.evaluation_ids.pop_back();
    CHECK_THROWS_AS(split_background_eval(d, bad), SplitError);
    bad = s;
    bad.background_ids.push_back("nope");
    CHECK_THROWS_AS(split_background_eval(d, bad), SplitError);
}

TEST_CASE("split rejects degenerate fractions") {
    const auto d = synth_generate(3, 1, 8, 0);
    SplitSpec s;
    s.background_fraction = 0.1;  // floor(0.3) = 0 background classes
    CHECK_THROWS_AS(split_background_eval(d, s), SplitError);
    s.background_fraction = 1.0;
    CHECK_THROWS_AS(split_background_eval(d, s), SplitError);
}

TEST_CASE("image folders round-trip bit-exactly") {
    test::TempDir dir("folder");
    const auto d = synth_generate(4, 3, 16, 2);
    save_image_folder(d, dir.path());
    CHECK(fs::exists(dir / "glyph_0000"));
    const auto back = load_image_folder(dir.path(), 16);
    CHECK(back == d);
    CHECK(back.fingerprint() == d.fingerprint());

    const auto small = load_image_folder(dir.path(), 8);
    CHECK(small.image_shape() == std::pair{8, 8});
    CHECK_NOTHROW(small.validate());
}

TEST_CASE("image folder errors") {
    test::TempDir dir("folder_err");
    CHECK_THROWS_AS(load_image_folder(dir / "missing", 8), LoadError);
    CHECK_THROWS_AS(load_image_folder(dir.path(), 8), IngestionError);  // no class dirs

    save_image_folder(synth_generate(2, 2, 8, 0), dir.path());
    fs::create_directories(dir / ".hidden");
    { std::ofstream(dir / "glyph_0000" / ".DS_Store") << "x"; }
    CHECK(load_image_folder(dir.path(), 8).class_count() == 2);

    fs::create_directories(dir / "empty_class");
    CHECK_THROWS_AS(load_image_folder(dir.path(), 8), IngestionError);
    fs::remove(dir / "empty_class");

    { std::ofstream(dir / "glyph_0001" / "broken.png") << "definitely not a png"; }
    try {
        load_image_folder(dir.path(), 8);
        FAIL("expected a decode error");
    } catch (const DecodeError& e) {
        CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
    }
}

TEST_CASE("preprocess stacks images and augments by bounded translation") {
    const auto d = synth_generate(2, 4, 12, 0);
    std::vector<Image> imgs;
    for (const auto& s : d.classes[0].samples) imgs.push_back(s.image);
    Rng rng(1);
    const auto plain = preprocess_batch(imgs, false, rng);
    CHECK(plain.count == 4);
    CHECK(plain.rows == 12);
    for (int i = 0; i < 4; ++i) {
        CHECK(std::equal(plain.image(i).begin(), plain.image(i).end(), imgs[i].pixels.begin()));
    }
    const auto aug = preprocess_batch(imgs, true, rng);
    for (int i = 0; i < 4; ++i) {
        bool found = false;
        for (int dy = -kMaxAugmentShift; dy <= kMaxAugmentShift && !found; ++dy) {
            for (int dx = -kMaxAugmentShift; dx <= kMaxAugmentShift && !found; ++dx) {
                const auto t = translate(imgs[i], dy, dx);
                found = std::equal(aug.image(i).begin(), aug.image(i).end(), t.pixels.begin());
            }
        }
        CHECK(found);
    }
    std::vector<Image> mixed{imgs[0], Image(5, 5)};
    CHECK_THROWS_AS(preprocess_batch(mixed, false, rng), BatchError);
}

TEST_CASE("translate fills with zeros") {
    Image img(3, 3);
    for (int i = 0; i < 9; ++i) img.pixels[i] = float(i + 1) / 10.0f;
    const auto t = translate(img, 1, -1);
    CHECK(t.at(0, 0) == 0.0f);
    CHECK(t.at(1, 0) == img.at(0, 1));
    CHECK(t.at(2, 1) == img.at(1, 2));
    CHECK(t.at(1, 2) == 0.0f);
}
