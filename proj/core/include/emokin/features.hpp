#pragma once

#include <array>
#include <vector>

#include "emokin/preprocess.hpp"
#include "emokin/telemetry.hpp"

namespace emokin {

using Vector39d = Eigen::Matrix<double, 39, 1>;

struct Derivatives {
    std::vector<Eigen::Vector3d> velocity;      // m/s, length n
    std::vector<Eigen::Vector3d> acceleration;  // m/s^2
    std::vector<Eigen::Vector3d> jerk;          // m/s^3
};

/// Three passes of central differencing (one-sided at the boundaries), each
/// pass differentiating the previous one. Requires >= 8 samples so jerk still
/// has fully interior points. Throws TooShort.
Derivatives derivatives(const EndEffectorStream& segment);

/// Euclidean displacement between consecutive samples, length n-1.
std::vector<double> position_difference(const EndEffectorStream& segment);

/// Elevation angle of each consecutive displacement: atan2(dz, hypot(dx, dy)),
/// in [-pi/2, pi/2]; zero-displacement steps give 0. Length n-1.
std::vector<double> slope_angle(const EndEffectorStream& segment);

/// Menger curvature of each consecutive point triple, length n-2. Collinear
/// or degenerate triples give 0.
std::vector<double> curvature(const EndEffectorStream& segment);

/// Shannon entropy (base 2, bits) of a 32-bin histogram of the speed series,
/// bins spanning [0, max speed]. A flat speed profile gives 0 bits.
double energy(const EndEffectorStream& segment);
double energy_of_speeds(const std::vector<double>& speeds);

inline constexpr int kKinematicChannels = 13;
inline constexpr int kStaticsSize = 39;  // (mean, variance, std) per kinematic channel

inline constexpr std::array<const char*, kKinematicChannels> kKinematicChannelNames = {
    "pos_x", "pos_y", "pos_z", "vel_x", "vel_y", "vel_z", "acc_x",
    "acc_y", "acc_z", "jerk_x", "jerk_y", "jerk_z", "pos_diff"};

/// The 20-feature representation of one instance: 13 kinematic sequences,
/// 2 expressive sequences, 5 expressive scalars, plus the 39 static summary
/// values (mean, population variance, std of each kinematic channel).
struct FeatureBundle {
    std::array<std::vector<double>, kKinematicChannels> kinematic;
    std::vector<double> slope;  // radians, length n-1
    std::vector<double> curv;   // 1/m, length n-2
    double energy_bits = 0.0;
    Eigen::Vector3d spatial_extent = Eigen::Vector3d::Zero();  // from RawExtent, meters
    double time_range = 0.0;                                   // seconds
    Vector39d statics = Vector39d::Zero();

    void validate() const;  // throws SchemaViolation
};

/// Extract the full bundle from a preprocessed segment (uniformly resampled,
/// bbox-normalized, origin-aligned) and its pre-normalization extent.
FeatureBundle build_bundle(const EndEffectorStream& segment, const RawExtent& raw_extent);

/// Segment-to-bundle shortcut applying the standard preprocessing order
/// (resample, normalize, align) before extraction.
FeatureBundle bundle_from_instance(const TaskInstance& instance, double rate = kDefaultSampleRate);

// ---------------------------------------------------------------------------
// PCA over the 39 static values
// ---------------------------------------------------------------------------

struct PcaModel {
    Vector39d mean = Vector39d::Zero();
    Vector39d scale = Vector39d::Ones();  // all ones unless fitted standardized
    Eigen::Matrix<double, 2, 39> components = Eigen::Matrix<double, 2, 39>::Zero();
    Eigen::Vector2d explained_variance = Eigen::Vector2d::Zero();
    bool standardized = false;
};

/// Top-2 eigenvectors of the sample covariance of the (optionally z-scored)
/// inputs. Deterministic sign: the largest-magnitude entry of each component
/// is positive. Throws DegenerateData for < 3 vectors or zero variance.
PcaModel pca_fit(const std::vector<Vector39d>& statics, bool standardize = true);

Eigen::Vector2d pca_project(const PcaModel& model, const Vector39d& statics);

}  // namespace emokin
