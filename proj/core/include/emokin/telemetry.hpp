#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emokin {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// ---------------------------------------------------------------------------
// Labels and tasks
// ---------------------------------------------------------------------------

/// Circumplex emotion labels: one per quadrant plus neutral at the origin.
/// Declaration order is the tie-break order used by both classifiers.
enum class Emotion : std::uint8_t { Joy, Pleasure, Sadness, Annoyance, Neutral };

inline constexpr std::array<Emotion, 5> kAllEmotions = {
    Emotion::Joy, Emotion::Pleasure, Emotion::Sadness, Emotion::Annoyance, Emotion::Neutral};

/// +1 positive, -1 negative, 0 neutral (pleasantness axis).
int valence_sign(Emotion e);
/// +1 high energy, -1 low energy, 0 neutral (activation axis).
int arousal_sign(Emotion e);

std::string_view to_string(Emotion e);
std::optional<Emotion> emotion_from_string(std::string_view s);

enum class TaskName : std::uint8_t { Lw, Star, Stir, S, Triangle, Drink, Knock, Throw, Wave };
enum class TaskCategory : std::uint8_t { MidAir, LineTracing };

/// One of the 14 valid (gesture, category) pairs. Line tracing exists only for
/// the five drawing gestures; mid-air exists for all nine.
struct TaskKind {
    TaskName name = TaskName::Lw;
    TaskCategory category = TaskCategory::MidAir;

    bool valid() const;
    auto operator<=>(const TaskKind&) const = default;
};

std::string_view to_string(TaskName n);
std::string_view to_string(TaskCategory c);
/// Canonical id, e.g. "lw_air", "star_trace".
std::string to_string(TaskKind k);
std::optional<TaskKind> task_from_string(std::string_view s);
/// All 14 valid kinds, mid-air first, in declaration order.
std::vector<TaskKind> all_task_kinds();

// ---------------------------------------------------------------------------
// Streams and instances
// ---------------------------------------------------------------------------

struct EeSample {
    double t = 0.0;              // seconds
    Eigen::Vector3d p{0, 0, 0};  // meters
};

struct JointSample {
    double t = 0.0;  // seconds
    Vector6d q = Vector6d::Zero();  // radians
};

/// 3-D end-effector trajectory. Timestamps strictly increasing, all finite.
struct EndEffectorStream {
    std::vector<EeSample> samples;

    double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
    void validate() const;  // throws SchemaViolation
    bool operator==(const EndEffectorStream&) const = default;
};

/// 6-joint angle trajectory, same timestamp rules as EndEffectorStream.
struct JointStream {
    std::vector<JointSample> samples;

    double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
    void validate() const;
    bool operator==(const JointStream&) const = default;
};

/// One segmented repetition of one task by one subject. The minimum of 8
/// end-effector samples is what three central-difference passes need.
struct TaskInstance {
    std::string subject_id;
    TaskKind task;
    std::optional<Emotion> label;
    int repetition = 0;
    EndEffectorStream ee;
    JointStream joints;

    void validate() const;
    bool operator==(const TaskInstance&) const = default;
};

struct ManifestKey {
    std::string subject;
    TaskKind task;
    std::optional<Emotion> label;

    auto operator<=>(const ManifestKey&) const = default;
};

struct Dataset {
    std::vector<TaskInstance> instances;
    std::map<ManifestKey, int> manifest;

    static Dataset from_instances(std::vector<TaskInstance> instances);
    void validate() const;
};

// ---------------------------------------------------------------------------
// I/O
// ---------------------------------------------------------------------------

/// Parse "t,x,y,z" CSV. Throws EmptyInput / NonMonotonicTime / MalformedRow.
EndEffectorStream parse_ee_stream(std::istream& in);
EndEffectorStream parse_ee_stream(const std::string& text);

/// Parse "t,q1,...,q6" CSV, same error contract, arity 7 enforced.
JointStream parse_joint_stream(std::istream& in);
JointStream parse_joint_stream(const std::string& text);

void write_ee_csv(const EndEffectorStream& s, std::ostream& out);
void write_joint_csv(const JointStream& s, std::ostream& out);

/// Format a double as decimal text with 9 significant digits. This is the
/// canonical on-disk precision; parsing the result and re-formatting it is
/// stable.
std::string format_g9(double v);

/// Write one instance under dir as
///   <dir>/<subject>/<task>_<category>/<label>_<rep>.json  (+ two CSVs).
/// Returns the metadata file path. Throws IoFailure.
std::filesystem::path write_instance(const TaskInstance& instance,
                                     const std::filesystem::path& dir);

/// Write every instance of a dataset plus a manifest.json summary.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Load a directory produced by write_instance/write_dataset. Instance order
/// is lexicographic by metadata path; errors carry the offending file path.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace emokin
