#include "emokin/polar.hpp"

#include <cmath>
#include <fstream>

#include "emokin/errors.hpp"
#include "emokin/preprocess.hpp"

namespace emokin {
namespace {

constexpr double kPi = 3.14159265358979323846;

void put_pixel(PolarImage& img, int x, int y, const std::array<std::uint8_t, 3>& rgb) {
    if (x < 0 || y < 0 || x >= PolarImage::kSize || y >= PolarImage::kSize) return;
    auto* p = img.at(x, y);
    p[0] = rgb[0];
    p[1] = rgb[1];
    p[2] = rgb[2];
}

// Integer midpoint (Bresenham) line, endpoints included.
void draw_line(PolarImage& img, int x0, int y0, int x1, int y1,
               const std::array<std::uint8_t, 3>& rgb) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put_pixel(img, x0, y0, rgb);
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(h, 360.0);
    if (h < 0) h += 360.0;
    double c = v * s;
    double hp = h / 60.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (int(hp)) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    double m = v - c;
    auto byte = [](double u) { return static_cast<std::uint8_t>(std::lround(255.0 * u)); };
    return {byte(r + m), byte(g + m), byte(b + m)};
}

void RasterStyle::validate() const {
    for (size_t i = 0; i < joint_hues.size(); ++i)
        for (size_t j = i + 1; j < joint_hues.size(); ++j) {
            double d = std::abs(std::fmod(joint_hues[i] - joint_hues[j], 360.0));
            d = std::min(d, 360.0 - d);
            if (d < 30.0) throw SchemaViolation("joint hues closer than 30 degrees");
        }
    if (!(max_radius_fraction > 0) || max_radius_fraction > 1)
        throw SchemaViolation("max_radius_fraction must be in (0, 1]");
}

PolarImage rasterize(const JointStream& segment, const RasterStyle& style) {
    style.validate();
    const auto& frames = segment.samples;
    const auto T = frames.size();
    if (T < 2) throw TooShort("need at least 2 frames to rasterize");

    constexpr int kC = PolarImage::kSize / 2;  // center (75, 75)
    const double rmax = style.max_radius_fraction * kC;
    PolarImage img;

    auto point = [&](int joint, size_t i) -> std::pair<int, int> {
        double r = rmax * double(i) / double(T - 1);
        double theta = std::fmod(frames[i].q[joint], 2.0 * kPi);
        return {int(std::lround(kC + r * std::cos(theta))),
                int(std::lround(kC - r * std::sin(theta)))};
    };
    auto color = [&](int joint, size_t i) {
        double v = style.luminance_start +
                   (style.luminance_end - style.luminance_start) * double(i) / double(T - 1);
        return hsv_to_rgb(style.joint_hues[joint], 1.0, v);
    };

    for (int j = 0; j < 6; ++j) {
        for (size_t i = 0; i + 1 < T; ++i) {
            auto [x0, y0] = point(j, i);
            auto [x1, y1] = point(j, i + 1);
            draw_line(img, x0, y0, x1, y1, color(j, i));
        }
        // each frame's own point carries its exact luminance
        for (size_t i = 0; i < T; ++i) {
            auto [x, y] = point(j, i);
            put_pixel(img, x, y, color(j, i));
        }
    }
    return img;
}

PolarImage rasterize_instance(const TaskInstance& instance, const RasterStyle& style, double rate) {
    return rasterize(resample_uniform(instance.joints, rate), style);
}

void write_ppm(const PolarImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << "P6\n" << PolarImage::kSize << ' ' << PolarImage::kSize << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    out.flush();
    if (!out) throw IoFailure("write failed for " + path.string());
}

PolarImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w != PolarImage::kSize || h != PolarImage::kSize || maxval != 255)
        throw SchemaViolation(path.string() + ": not a 150x150 P6 image");
    in.get();  // single whitespace after maxval
    PolarImage img;
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw SchemaViolation(path.string() + ": truncated pixel payload");
    return img;
}

}  // namespace emokin
