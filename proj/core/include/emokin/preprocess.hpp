#pragma once

#include <vector>

#include "emokin/telemetry.hpp"

namespace emokin {

struct SegmentationConfig {
    double speed_threshold = 0.02;  // m/s, absolute
    double min_duration = 0.5;      // s
    int hysteresis_dwell = 5;       // samples

    void validate() const;  // throws SchemaViolation
};

/// Per-axis size and duration of a segment measured before any normalization.
/// Captured here because bounding-box normalization erases spatial extent.
struct RawExtent {
    Eigen::Vector3d extent = Eigen::Vector3d::Zero();  // meters, max - min per axis
    double duration = 0.0;                             // seconds
};

struct Segment {
    EndEffectorStream stream;
    RawExtent raw_extent;
};

/// Central-difference speed magnitude per sample, one-sided at the ends.
/// Works for non-uniform timestamps. Length equals the input length.
std::vector<double> speed_series(const EndEffectorStream& s);

/// Threshold segmentation with dwell hysteresis: a segment opens at the first
/// sample of a run of hysteresis_dwell consecutive samples at or above
/// speed_threshold and closes just before a run of hysteresis_dwell samples
/// below it. Segments shorter than min_duration are dropped.
std::vector<Segment> segment(const EndEffectorStream& stream, const SegmentationConfig& cfg);

RawExtent raw_extent_of(const EndEffectorStream& s);

/// Rescale each axis with nonzero extent to span exactly 1 (anchored at the
/// axis minimum). Zero-extent axes pass through untouched. Throws
/// DegenerateSegment when all three axes are flat.
EndEffectorStream normalize_bbox(const EndEffectorStream& segment);

/// Translate so the first sample sits at the origin.
EndEffectorStream align_origin(const EndEffectorStream& segment);

/// Linear-interpolation resampling onto the uniform grid t0 + k/rate. The
/// output starts at the first input timestamp and its last sample lands within
/// one sample period of the final input timestamp. Throws TooShort when the
/// input spans no more than one output period.
EndEffectorStream resample_uniform(const EndEffectorStream& segment, double rate);
JointStream resample_uniform(const JointStream& segment, double rate);

/// Shared default: downstream derivative scales assume this rate.
inline constexpr double kDefaultSampleRate = 50.0;

}  // namespace emokin
