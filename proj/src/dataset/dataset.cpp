#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "cfsl/dataset.hpp"
#include "cfsl/error.hpp"
#include "cfsl/hash.hpp"

namespace cfsl {

std::size_t ClassDataset::sample_count() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.samples.size();
    return n;
}

std::pair<int, int> ClassDataset::image_shape() const {
    for (const auto& c : classes) {
        if (!c.samples.empty()) return {c.samples.front().image.rows, c.samples.front().image.cols};
    }
    return {0, 0};
}

const ClassRecord* ClassDataset::find(std::string_view class_id) const {
    for (const auto& c : classes) {
        if (c.class_id == class_id) return &c;
    }
    return nullptr;
}

void ClassDataset::validate() const {
    std::set<std::string> ids;
    const auto shape = image_shape();
    for (const auto& c : classes) {
        if (!ids.insert(c.class_id).second) throw IngestionError("duplicate class id '" + c.class_id + "'");
        if (c.samples.empty()) throw IngestionError("class '" + c.class_id + "' has no samples");
        std::set<std::string> sample_ids;
        for (const auto& s : c.samples) {
            if (!sample_ids.insert(s.sample_id).second) {
                throw IngestionError("duplicate sample id '" + s.sample_id + "' in class '" + c.class_id + "'");
            }
            if (s.image.rows != shape.first || s.image.cols != shape.second ||
                s.image.pixels.size() != static_cast<std::size_t>(s.image.rows) * s.image.cols) {
                throw IngestionError("sample '" + c.class_id + "/" + s.sample_id + "' has a different shape");
            }
            for (float v : s.image.pixels) {
                if (!(v >= 0.0f && v <= 1.0f)) {
                    throw IngestionError("sample '" + c.class_id + "/" + s.sample_id + "' has pixels outside [0,1]");
                }
            }
        }
    }
}

std::uint64_t ClassDataset::fingerprint() const {
    Fnv1a h;
    for (const auto& c : classes) {
        h.update(c.class_id);
        for (const auto& s : c.samples) {
            h.update(s.sample_id);
            h.update_u64(static_cast<std::uint64_t>(s.image.rows));
            h.update_u64(static_cast<std::uint64_t>(s.image.cols));
            h.update(std::span<const float>(s.image.pixels));
        }
    }
    return h.digest();
}

namespace {

ClassDataset select_classes(const ClassDataset& data, const std::vector<bool>& keep, bool value) {
    ClassDataset out;
    for (std::size_t i = 0; i < data.classes.size(); ++i) {
        if (keep[i] == value) out.classes.push_back(data.classes[i]);
    }
    return out;
}

}  // namespace

DatasetSplit split_background_eval(const ClassDataset& data, const SplitSpec& spec) {
    const std::size_t n = data.classes.size();
    if (n < 2) throw SplitError("split needs at least 2 classes, dataset has " + std::to_string(n));

    std::vector<bool> in_background(n, false);
    if (spec.mode == SplitSpec::Mode::ratio) {
        if (!(spec.background_fraction > 0.0 && spec.background_fraction < 1.0)) {
            throw SplitError("background_fraction must lie in (0, 1)");
        }
        // The small epsilon keeps e.g. 0.29 * 100 from flooring to 28.
        const auto n_bg = static_cast<std::size_t>(std::floor(spec.background_fraction * static_cast<double>(n) + 1e-9));
        if (n_bg < 1 || n_bg >= n) {
            throw SplitError("background_fraction " + std::to_string(spec.background_fraction) + " over " +
                             std::to_string(n) + " classes leaves one side empty");
        }
        Rng rng = Rng::derive(static_cast<std::uint64_t>(spec.seed), {0x5b17u});
        for (std::size_t idx : rng.choose(n, n_bg)) in_background[idx] = true;
    } else {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < n; ++i) index[data.classes[i].class_id] = i;
        std::vector<int> seen(n, 0);
        auto mark = [&](const std::vector<std::string>& ids, bool bg) {
            for (const auto& id : ids) {
                auto it = index.find(id);
                if (it == index.end()) throw SplitError("split lists unknown class '" + id + "'");
                if (seen[it->second]++) throw SplitError("class '" + id + "' listed twice");
                in_background[it->second] = bg;
            }
        };
        mark(spec.background_ids, true);
        mark(spec.evaluation_ids, false);
        for (std::size_t i = 0; i < n; ++i) {
            if (!seen[i]) throw SplitError("class '" + data.classes[i].class_id + "' is in neither split");
        }
        if (spec.background_ids.empty() || spec.evaluation_ids.empty()) {
            throw SplitError("explicit split leaves one side empty");
        }
    }
    return {select_classes(data, in_background, true), select_classes(data, in_background, false)};
}

}  // namespace cfsl
