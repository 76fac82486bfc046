#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "emokin/telemetry.hpp"

namespace emokin {

/// Fixed-size RGB canvas for the polar trajectory plots.
struct PolarImage {
    static constexpr int kSize = 150;
    std::array<std::uint8_t, kSize * kSize * 3> pixels;  // row-major, RGB

    PolarImage() { pixels.fill(0xFF); }  // white background

    std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (y * kSize + x); }
    const std::uint8_t* at(int x, int y) const { return pixels.data() + 3 * (y * kSize + x); }
    bool operator==(const PolarImage&) const = default;
};

struct RasterStyle {
    std::array<double, 6> joint_hues = {0, 60, 120, 180, 240, 300};  // degrees, HSV
    double luminance_start = 0.85;
    double luminance_end = 0.25;
    double max_radius_fraction = 0.95;

    void validate() const;  // hues pairwise >= 30 degrees apart
};

/// Paint joint angles in polar form: angle = wrapped joint rotation, radius =
/// relative time, one hue per joint with luminance falling from start to end.
/// Consecutive frames are joined with 1 px midpoint lines colored by their
/// starting frame; joints are drawn in order so later joints win overlaps.
/// Throws TooShort for fewer than 2 frames.
PolarImage rasterize(const JointStream& segment, const RasterStyle& style = {});

/// Resample to the given rate and rasterize, the standard instance pipeline.
PolarImage rasterize_instance(const TaskInstance& instance, const RasterStyle& style = {},
                              double rate = 50.0);

/// Binary PPM: header "P6\n150 150\n255\n" then raw RGB. Throws IoFailure.
void write_ppm(const PolarImage& image, const std::filesystem::path& path);
PolarImage read_ppm(const std::filesystem::path& path);

/// HSV (h in degrees, s and v in [0,1]) to 8-bit RGB; exposed for the tests.
std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v);

}  // namespace emokin
