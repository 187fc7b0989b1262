#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cfsl/dataset.hpp"
#include "cfsl/error.hpp"

namespace fs = std::filesystem;

namespace cfsl {
namespace {

bool hidden(const fs::path& p) {
    const auto name = p.filename().string();
    return !name.empty() && name.front() == '.';
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_dirs) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (hidden(entry.path())) continue;
        if (want_dirs ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return out;
}

Image decode(const fs::path& file, int image_size) {
    cv::Mat raw = cv::imread(file.string(), cv::IMREAD_GRAYSCALE);
    if (raw.empty()) throw DecodeError("cannot decode image '" + file.string() + "'");
    cv::Mat sized;
    if (raw.rows == image_size && raw.cols == image_size) {
        sized = raw;
    } else {
        cv::resize(raw, sized, cv::Size(image_size, image_size), 0, 0, cv::INTER_AREA);
    }
    Image img(image_size, image_size);
    for (int r = 0; r < image_size; ++r) {
        const unsigned char* row = sized.ptr<unsigned char>(r);
        for (int c = 0; c < image_size; ++c) img.at(r, c) = static_cast<float>(row[c] * (1.0 / 255.0));
    }
    return img;
}

bool has_image_extension(const std::string& name) {
    static const char* exts[] = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".pbm", ".ppm", ".tif", ".tiff"};
    auto lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    for (const char* e : exts) {
        const std::string ext(e);
        if (lower.size() > ext.size() && lower.compare(lower.size() - ext.size(), ext.size(), ext) == 0) return true;
    }
    return false;
}

}  // namespace

ClassDataset load_image_folder(const fs::path& root, int image_size) {
    if (image_size < 1) throw LoadError("image_size must be positive");
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw LoadError("dataset root '" + root.string() + "' does not exist");

    ClassDataset data;
    for (const auto& class_dir : sorted_entries(root, true)) {
        ClassRecord record;
        record.class_id = class_dir.filename().string();
        for (const auto& file : sorted_entries(class_dir, false)) {
            record.samples.push_back({file.filename().string(), decode(file, image_size)});
        }
        if (record.samples.empty()) {
            throw IngestionError("class '" + record.class_id + "' has no readable images");
        }
        data.classes.push_back(std::move(record));
    }
    if (data.classes.empty()) throw IngestionError("dataset root '" + root.string() + "' contains no class directories");
    data.validate();
    return data;
}

void save_image_folder(const ClassDataset& data, const fs::path& root) {
    fs::create_directories(root);
    for (const auto& c : data.classes) {
        const fs::path dir = root / c.class_id;
        fs::create_directories(dir);
        for (const auto& s : c.samples) {
            cv::Mat mat(s.image.rows, s.image.cols, CV_8U);
            for (int r = 0; r < s.image.rows; ++r) {
                auto* row = mat.ptr<unsigned char>(r);
                for (int col = 0; col < s.image.cols; ++col) {
                    row[col] = static_cast<unsigned char>(std::lround(std::clamp(s.image.at(r, col), 0.0f, 1.0f) * 255.0f));
                }
            }
            const std::string name = has_image_extension(s.sample_id) ? s.sample_id : s.sample_id + ".png";
            const fs::path file = dir / name;
            if (!cv::imwrite(file.string(), mat)) throw LoadError("cannot write image '" + file.string() + "'");
        }
    }
}

}  // namespace cfsl
