#include <algorithm>
#include <cstdio>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cfsl/cli.hpp"
#include "cfsl/error.hpp"

namespace cfsl::cli {
namespace {

struct Layout {
    int width, height;
    int left = 60, right = 20, top = 40, bottom = 70;
    int group_width, bar_width;
    double y_max = 100.0;

    Layout(std::size_t groups, std::size_t bars) {
        bar_width = 28;
        group_width = static_cast<int>(std::max<std::size_t>(bars, 1)) * bar_width + 30;
        width = left + right + static_cast<int>(std::max<std::size_t>(groups, 1)) * group_width;
        width = std::max(width, 320 + 140);
        height = 360;
    }
    int plot_height() const { return height - top - bottom; }
    double y(double value) const { return top + plot_height() * (1.0 - std::clamp(value, 0.0, y_max) / y_max); }
    int bar_x(std::size_t g, std::size_t b) const {
        return left + static_cast<int>(g) * group_width + 15 + static_cast<int>(b) * bar_width;
    }
};

// Fixed palette so outputs are stable.
const int kPalette[][3] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189},
                           {140, 86, 75},  {227, 119, 194}, {127, 127, 127}};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

}  // namespace

std::string render_svg(const std::vector<std::string>& groups, const std::vector<ChartSeries>& series,
                       const std::string& title) {
    const Layout L(groups.size(), series.size());
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << L.width << "\" height=\"" << L.height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << L.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(title)
      << "</text>\n";
    for (int tick = 0; tick <= 100; tick += 20) {
        const double y = L.y(tick);
        s << "<line x1=\"" << L.left << "\" y1=\"" << fmt(y) << "\" x2=\"" << L.width - L.right << "\" y2=\"" << fmt(y)
          << "\" stroke=\"#dddddd\"/>\n";
        s << "<text x=\"" << L.left - 6 << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">" << tick << "</text>\n";
    }
    for (std::size_t b = 0; b < series.size(); ++b) {
        const auto* c = kPalette[b % std::size(kPalette)];
        const std::string colour =
            "rgb(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]) + ")";
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (g >= series[b].means.size() || !series[b].means[g]) continue;
            const double m = *series[b].means[g];
            const double sd = series[b].stds[g].value_or(0.0);
            const int x = L.bar_x(g, b);
            const double y0 = L.y(m);
            s << "<rect x=\"" << x << "\" y=\"" << fmt(y0) << "\" width=\"" << L.bar_width - 4 << "\" height=\""
              << fmt(L.y(0) - y0) << "\" fill=\"" << colour << "\"/>\n";
            const int cx = x + (L.bar_width - 4) / 2;
            s << "<line x1=\"" << cx << "\" y1=\"" << fmt(L.y(m - sd)) << "\" x2=\"" << cx << "\" y2=\""
              << fmt(L.y(m + sd)) << "\" stroke=\"black\"/>\n";
            for (double e : {m - sd, m + sd}) {
                s << "<line x1=\"" << cx - 5 << "\" y1=\"" << fmt(L.y(e)) << "\" x2=\"" << cx + 5 << "\" y2=\""
                  << fmt(L.y(e)) << "\" stroke=\"black\"/>\n";
            }
        }
        const int lx = L.left + static_cast<int>(b) * 130;
        s << "<rect x=\"" << lx << "\" y=\"" << L.height - 22 << "\" width=\"10\" height=\"10\" fill=\"" << colour
          << "\"/>\n";
        s << "<text x=\"" << lx + 14 << "\" y=\"" << L.height - 13 << "\">" << xml_escape(series[b].name)
          << "</text>\n";
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const int cx = L.left + static_cast<int>(g) * L.group_width + L.group_width / 2;
        s << "<text x=\"" << cx << "\" y=\"" << fmt(L.y(0) + 16) << "\" text-anchor=\"middle\">"
          << xml_escape(groups[g]) << "</text>\n";
    }
    s << "<line x1=\"" << L.left << "\" y1=\"" << fmt(L.y(0)) << "\" x2=\"" << L.width - L.right << "\" y2=\""
      << fmt(L.y(0)) << "\" stroke=\"black\"/>\n";
    s << "</svg>\n";
    return s.str();
}

void write_png_chart(const std::vector<std::string>& groups, const std::vector<ChartSeries>& series,
                     const std::string& title, const std::filesystem::path& path) {
    const Layout L(groups.size(), series.size());
    cv::Mat img(L.height, L.width, CV_8UC3, cv::Scalar(255, 255, 255));
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    auto pt = [](double x, double y) { return cv::Point(static_cast<int>(x + 0.5), static_cast<int>(y + 0.5)); };
    // Hershey fonts are ASCII only.
    std::string ascii_title;
    for (char c : title) ascii_title += (static_cast<unsigned char>(c) < 128) ? c : '?';
    cv::putText(img, ascii_title, pt(L.left, 22), font, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    for (int tick = 0; tick <= 100; tick += 20) {
        cv::line(img, pt(L.left, L.y(tick)), pt(L.width - L.right, L.y(tick)), cv::Scalar(221, 221, 221));
        cv::putText(img, std::to_string(tick), pt(L.left - 30, L.y(tick) + 4), font, 0.35, cv::Scalar(0, 0, 0), 1,
                    cv::LINE_AA);
    }
    for (std::size_t b = 0; b < series.size(); ++b) {
        const auto* c = kPalette[b % std::size(kPalette)];
        const cv::Scalar colour(c[2], c[1], c[0]);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (g >= series[b].means.size() || !series[b].means[g]) continue;
            const double m = *series[b].means[g];
            const double sd = series[b].stds[g].value_or(0.0);
            const int x = L.bar_x(g, b);
            cv::rectangle(img, pt(x, L.y(m)), pt(x + L.bar_width - 4, L.y(0)), colour, cv::FILLED);
            const int cx = x + (L.bar_width - 4) / 2;
            cv::line(img, pt(cx, L.y(m - sd)), pt(cx, L.y(m + sd)), cv::Scalar(0, 0, 0));
            cv::line(img, pt(cx - 5, L.y(m - sd)), pt(cx + 5, L.y(m - sd)), cv::Scalar(0, 0, 0));
            cv::line(img, pt(cx - 5, L.y(m + sd)), pt(cx + 5, L.y(m + sd)), cv::Scalar(0, 0, 0));
        }
        const int lx = L.left + static_cast<int>(b) * 130;
        cv::rectangle(img, pt(lx, L.height - 22), pt(lx + 10, L.height - 12), colour, cv::FILLED);
        cv::putText(img, series[b].name, pt(lx + 14, L.height - 13), font, 0.38, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const int cx = L.left + static_cast<int>(g) * L.group_width + 4;
        cv::putText(img, groups[g], pt(cx, L.y(0) + 16), font, 0.35, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    cv::line(img, pt(L.left, L.y(0)), pt(L.width - L.right, L.y(0)), cv::Scalar(0, 0, 0));
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), img)) throw LoadError("cannot write chart '" + path.string() + "'");
}

}  // namespace cfsl::cli
