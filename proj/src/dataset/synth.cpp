#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "cfsl/dataset.hpp"
#include "cfsl/error.hpp"

namespace cfsl {
namespace {

struct Point {
    double x;
    double y;
};

using Stroke = std::vector<Point>;

double segment_distance(Point p, Point a, Point b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

std::vector<Stroke> make_glyph(int size, Rng& rng) {
    const int n_strokes = static_cast<int>(rng.uniform_int(2, 4));
    const double lo = 0.15 * size, hi = 0.85 * size;
    std::vector<Stroke> strokes;
    for (int s = 0; s < n_strokes; ++s) {
        const int n_points = static_cast<int>(rng.uniform_int(2, 4));
        Stroke stroke;
        for (int p = 0; p < n_points; ++p) stroke.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi)});
        strokes.push_back(std::move(stroke));
    }
    return strokes;
}

Image render(const std::vector<Stroke>& glyph, int size, Rng& rng) {
    const double jitter = 0.03 * size;
    const double shift_x = rng.uniform(-1.0, 1.0), shift_y = rng.uniform(-1.0, 1.0);
    const double half_width = rng.uniform(0.8, 1.2);

    std::vector<std::pair<Point, Point>> segments;
    for (const auto& stroke : glyph) {
        Stroke moved;
        for (const auto& p : stroke) {
            moved.push_back({p.x + shift_x + rng.normal(0.0, jitter), p.y + shift_y + rng.normal(0.0, jitter)});
        }
        for (std::size_t i = 0; i + 1 < moved.size(); ++i) segments.emplace_back(moved[i], moved[i + 1]);
    }

    Image img(size, size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const Point centre{c + 0.5, r + 0.5};
            double d = 1e9;
            for (const auto& [a, b] : segments) d = std::min(d, segment_distance(centre, a, b));
            const double ink = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
            // Quantized the same way an 8-bit decode produces values, so an
            // exported dataset reloads bit-exactly.
            const long q = std::lround(ink * 255.0);
            img.at(r, c) = static_cast<float>(static_cast<double>(q) * (1.0 / 255.0));
        }
    }
    return img;
}

}  // namespace

ClassDataset synth_generate(int n_classes, int samples_per_class, int image_size, std::int64_t seed) {
    if (n_classes < 1 || samples_per_class < 1 || image_size < 1) {
        throw ConfigError("synth_generate: class count, samples per class and image size must be >= 1");
    }
    ClassDataset data;
    data.classes.reserve(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        Rng glyph_rng = Rng::derive(static_cast<std::uint64_t>(seed), {0x61u, static_cast<std::uint64_t>(c)});
        const auto glyph = make_glyph(image_size, glyph_rng);
        ClassRecord record;
        char name[32];
        std::snprintf(name, sizeof name, "glyph_%04d", c);
        record.class_id = name;
        for (int s = 0; s < samples_per_class; ++s) {
            Rng sample_rng = Rng::derive(static_cast<std::uint64_t>(seed),
                                         {0x62u, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(s)});
            std::snprintf(name, sizeof name, "%04d.png", s);
            record.samples.push_back({name, render(glyph, image_size, sample_rng)});
        }
        data.classes.push_back(std::move(record));
    }
    return data;
}

}  // namespace cfsl
