#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfsl/rng.hpp"

namespace cfsl {

// Single-channel image, row-major, values in [0, 1].
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int r, int c) : rows(r), cols(c), pixels(static_cast<std::size_t>(r) * c, 0.0f) {}

    float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Image&) const = default;
};

struct Sample {
    std::string sample_id;
    Image image;

    bool operator==(const Sample&) const = default;
};

struct ClassRecord {
    std::string class_id;
    std::vector<Sample> samples;

    bool operator==(const ClassRecord&) const = default;
};

// Class-organized dataset. Class order and sample order are part of the
// dataset's identity: loaders sort lexicographically and every derived
// dataset preserves relative order.
struct ClassDataset {
    std::vector<ClassRecord> classes;

    std::size_t class_count() const { return classes.size(); }
    std::size_t sample_count() const;
    // Shared spatial size, or {0, 0} when empty.
    std::pair<int, int> image_shape() const;
    const ClassRecord* find(std::string_view class_id) const;

    // Throws IngestionError naming the first violated invariant.
    void validate() const;

    std::uint64_t fingerprint() const;

    bool operator==(const ClassDataset&) const = default;
};

struct SplitSpec {
    enum class Mode { ratio, explicit_lists };

    Mode mode = Mode::ratio;
    double background_fraction = 0.8;
    std::int64_t seed = 0;
    std::vector<std::string> background_ids;
    std::vector<std::string> evaluation_ids;
};

struct DatasetSplit {
    ClassDataset background;
    ClassDataset evaluation;
};

// Loads root/<class>/<file>. Images are decoded to grayscale, resized to
// image_size x image_size (area interpolation) and scaled to [0, 1].
// Hidden entries (leading '.') are ignored; every other file must decode.
ClassDataset load_image_folder(const std::filesystem::path& root, int image_size);

// Writes root/<class_id>/<sample_id> as 8-bit PNG (".png" appended when the
// id has no image extension). Images whose pixels are multiples of 1/255
// reload bit-exactly.
void save_image_folder(const ClassDataset& data, const std::filesystem::path& root);

DatasetSplit split_background_eval(const ClassDataset& data, const SplitSpec& spec);

// Procedural glyph dataset: each class is a random set of strokes, each
// sample a jittered rendering of them. Pixels are quantized to k/255.
ClassDataset synth_generate(int n_classes, int samples_per_class, int image_size, std::int64_t seed);

// Stacked images, count x rows x cols.
struct ImageBatch {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    std::span<const float> image(int i) const {
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        return {data.data() + n * i, n};
    }
};

inline constexpr int kMaxAugmentShift = 2;

// Stacks images into a batch. With augment, each image is translated by an
// independent random offset in [-2, 2]^2 with zero fill.
ImageBatch preprocess_batch(std::span<const Image* const> samples, bool augment, Rng& rng);
ImageBatch preprocess_batch(std::span<const Image> samples, bool augment, Rng& rng);

// Zero-filled translation: out(r, c) = in(r - dy, c - dx).
Image translate(const Image& in, int dy, int dx);

}  // namespace cfsl
