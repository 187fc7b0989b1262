#include <algorithm>
#include <string>

#include "cfsl/dataset.hpp"
#include "cfsl/error.hpp"

namespace cfsl {

Image translate(const Image& in, int dy, int dx) {
    Image out(in.rows, in.cols);
    for (int r = 0; r < in.rows; ++r) {
        const int sr = r - dy;
        if (sr < 0 || sr >= in.rows) continue;
        for (int c = 0; c < in.cols; ++c) {
            const int sc = c - dx;
            if (sc >= 0 && sc < in.cols) out.at(r, c) = in.at(sr, sc);
        }
    }
    return out;
}

ImageBatch preprocess_batch(std::span<const Image* const> samples, bool augment, Rng& rng) {
    ImageBatch batch;
    if (samples.empty()) return batch;
    batch.count = static_cast<int>(samples.size());
    batch.rows = samples.front()->rows;
    batch.cols = samples.front()->cols;
    const std::size_t plane = static_cast<std::size_t>(batch.rows) * batch.cols;
    batch.data.resize(plane * samples.size());

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Image& img = *samples[i];
        if (img.rows != batch.rows || img.cols != batch.cols || img.pixels.size() != plane) {
            throw BatchError("image " + std::to_string(i) + " is " + std::to_string(img.rows) + "x" +
                             std::to_string(img.cols) + ", batch expects " + std::to_string(batch.rows) + "x" +
                             std::to_string(batch.cols));
        }
        float* dst = batch.data.data() + plane * i;
        if (!augment) {
            std::copy(img.pixels.begin(), img.pixels.end(), dst);
            continue;
        }
        const int dy = static_cast<int>(rng.uniform_int(-kMaxAugmentShift, kMaxAugmentShift));
        const int dx = static_cast<int>(rng.uniform_int(-kMaxAugmentShift, kMaxAugmentShift));
        const Image moved = translate(img, dy, dx);
        std::copy(moved.pixels.begin(), moved.pixels.end(), dst);
    }
    return batch;
}

ImageBatch preprocess_batch(std::span<const Image> samples, bool augment, Rng& rng) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(samples.size());
    for (const auto& s : samples) ptrs.push_back(&s);
    return preprocess_batch(std::span<const Image* const>(ptrs), augment, rng);
}

}  // namespace cfsl
