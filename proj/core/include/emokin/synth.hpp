#pragma once

#include <array>
#include <utility>

#include "emokin/telemetry.hpp"

namespace emokin {

/// How one emotion perturbs task execution. Magnitudes are calibration
/// choices for a synthetic stand-in, not measured human effect sizes.
struct EmotionProfile {
    Emotion label = Emotion::Neutral;
    double speed_scale = 1.0;     // multiplies the base traversal speed
    double jerk_noise_amp = 1.0;  // m/s^3, drives hand wander + speed wobble
    double tremor_freq = 5.0;     // Hz
    double pause_prob = 0.02;     // micro-pauses per second
    double duration_scale = 1.0;  // stretches total time

    void validate() const;
};

/// Defaults keep high-arousal labels (Joy, Annoyance) jerkier than the rest
/// and the speed ranges ordered Annoyance > Joy > Neutral.
std::array<EmotionProfile, 5> default_profiles();
const EmotionProfile& default_profile(Emotion e);

struct ArmModel {
    // d1 (base riser) then five link lengths along the chain, meters.
    std::array<double, 6> links = {0.15, 0.24, 0.21, 0.08, 0.08, 0.09};
    std::array<std::pair<double, double>, 6> joint_limits;
    Eigen::Vector3d base = Eigen::Vector3d::Zero();

    double max_reach() const;  // from the shoulder, fully stretched
};
ArmModel default_arm();

/// Per-subject habit multipliers, drawn once from the subject seed.
struct SubjectStyle {
    std::string subject_id;
    double speed_mult = 1.0;   // all in [0.7, 1.3]
    double jerk_mult = 1.0;
    double tremor_mult = 1.0;
};
SubjectStyle subject_style(const std::string& id, std::uint64_t seed);

/// Arc-length parameterized polyline in the unit box.
struct PathTemplate {
    std::vector<Eigen::Vector3d> points;
    std::vector<double> cumlen;  // cumlen[0] = 0, cumlen.back() = total length
    bool traced = false;         // surface-constrained (line tracing) variant
    Eigen::Vector3d surface_normal = Eigen::Vector3d::Zero();  // tracing surface; zero if mid-air

    double length() const { return cumlen.empty() ? 0.0 : cumlen.back(); }
    Eigen::Vector3d at(double s) const;  // clamped to [0, length]
};

/// Closed-form template per task. Star and Triangle have sharp corners, S and
/// Stir are tangent-continuous, Lw mixes both. Line-tracing variants are
/// flattened onto their drawing plane.
PathTemplate task_path(TaskKind task);

/// Placement of the unit task box inside the arm workspace.
inline constexpr double kTaskScale = 0.25;  // meters per unit-box unit
inline const Eigen::Vector3d kTaskCenter{0.32, 0.0, 0.22};
inline constexpr double kBaseSpeed = 0.15;      // m/s nominal hand speed
inline constexpr double kSynthRate = 50.0;      // Hz

/// Simulated hand trajectory: time-parameterizes the path at the profile's
/// speed, superimposes band-limited wander scaled from jerk_noise_amp, tremor
/// at tremor_freq, speed wobble, and random micro-pauses. Deterministic per
/// seed. With jerk_noise_amp = 0 the output lies exactly on the path.
EndEffectorStream perturb(const PathTemplate& path, const EmotionProfile& profile,
                          const SubjectStyle& style, std::uint64_t seed);

/// Damped least-squares tracking of the hand path. Returns the joint stream
/// and the forward-kinematics end-effector stream actually realized by the
/// arm. Throws OutOfWorkspace / IkDivergence (5 mm bound).
std::pair<JointStream, EndEffectorStream> track(const ArmModel& arm, const EndEffectorStream& hand);

Eigen::Vector3d forward_kinematics(const ArmModel& arm, const Vector6d& q);

/// Full factorial generation: subjects x tasks x 5 emotions x reps, one
/// labeled instance per cell, reproducible from the seed alone.
Dataset gen_dataset(int n_subjects, const std::vector<TaskKind>& tasks, int reps_per_cell,
                    std::uint64_t seed);

}  // namespace emokin
