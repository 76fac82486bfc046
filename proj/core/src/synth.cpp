#include "emokin/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "emokin/errors.hpp"
#include "emokin/rng.hpp"

namespace emokin {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTau = 2.0 * kPi;

}  // namespace

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

void EmotionProfile::validate() const {
    if (!(speed_scale > 0) || !(duration_scale > 0) || jerk_noise_amp < 0 || tremor_freq < 0 ||
        pause_prob < 0)
        throw SchemaViolation("emotion profile values out of range");
}

std::array<EmotionProfile, 5> default_profiles() {
    //                      label       speed jerk tremor pause duration
    return {{{Emotion::Joy, 1.18, 5.0, 3.0, 0.02, 0.90},
             {Emotion::Pleasure, 0.82, 1.8, 2.0, 0.05, 1.08},
             {Emotion::Sadness, 0.62, 0.6, 1.5, 0.16, 1.18},
             {Emotion::Annoyance, 1.45, 9.0, 4.5, 0.08, 0.82},
             {Emotion::Neutral, 1.00, 1.2, 5.0, 0.02, 1.00}}};
}

const EmotionProfile& default_profile(Emotion e) {
    static const auto table = default_profiles();
    return table[static_cast<size_t>(e)];
}

// ---------------------------------------------------------------------------
// Arm
// ---------------------------------------------------------------------------

double ArmModel::max_reach() const {
    return links[1] + links[2] + links[3] + links[4] + links[5];
}

ArmModel default_arm() {
    ArmModel arm;
    for (auto& [lo, hi] : arm.joint_limits) {
        lo = -kTau;
        hi = kTau;
    }
    return arm;
}

SubjectStyle subject_style(const std::string& id, std::uint64_t seed) {
    Rng rng(seed);
    SubjectStyle s;
    s.subject_id = id;
    s.speed_mult = rng.uniform(0.7, 1.3);
    s.jerk_mult = rng.uniform(0.7, 1.3);
    s.tremor_mult = rng.uniform(0.7, 1.3);
    return s;
}

// ---------------------------------------------------------------------------
// Task path templates
// ---------------------------------------------------------------------------

Eigen::Vector3d PathTemplate::at(double s) const {
    if (points.size() < 2) return points.empty() ? Eigen::Vector3d::Zero() : points.front();
    s = std::clamp(s, 0.0, cumlen.back());
    auto it = std::upper_bound(cumlen.begin(), cumlen.end(), s);
    size_t hi = std::min(points.size() - 1, size_t(it - cumlen.begin()));
    size_t lo = hi - 1;
    double seg = cumlen[hi] - cumlen[lo];
    double u = seg > 0 ? (s - cumlen[lo]) / seg : 0.0;
    return (1.0 - u) * points[lo] + u * points[hi];
}

namespace {

using P3 = Eigen::Vector3d;
using Pts = std::vector<P3>;

void line_to(Pts& pts, const P3& to, int steps = 1) {
    P3 from = pts.back();
    for (int i = 1; i <= steps; ++i) pts.push_back(from + (to - from) * (double(i) / steps));
}

// Templates are drawn in the xz-plane (y = 0) unless noted.
Pts path_lw() {
    Pts p{{0.0, 0, 1.0}};
    line_to(p, {0.0, 0, 0.0});
    line_to(p, {0.35, 0, 0.0});
    // smooth quarter-ellipse bridge up to the W start
    for (int i = 1; i <= 24; ++i) {
        double phi = 0.5 * kPi * i / 24.0;
        p.push_back({0.35 + 0.15 * std::sin(phi), 0, 0.9 - 0.9 * std::cos(phi)});
    }
    line_to(p, {0.625, 0, 0.0});
    line_to(p, {0.75, 0, 0.55});
    line_to(p, {0.875, 0, 0.0});
    line_to(p, {1.0, 0, 0.9});
    return p;
}

Pts path_star() {
    std::array<P3, 5> v;
    for (int k = 0; k < 5; ++k) {
        double th = kPi / 2 + k * (4.0 * kPi / 5.0);  // pentagram order
        v[k] = {0.5 + 0.5 * std::cos(th), 0, 0.5 + 0.5 * std::sin(th)};
    }
    P3 mid = 0.5 * (v[4] + v[0]);
    Pts p{mid};
    for (int k = 0; k < 5; ++k) line_to(p, v[k]);
    line_to(p, mid);
    return p;
}

Pts path_stir() {  // horizontal stirring loops, xy-plane with a slight bob
    Pts p;
    for (int i = 0; i <= 450; ++i) {  // 2.5 turns, 2 degrees per step
        double phi = kTau * 2.5 * i / 450.0;
        p.push_back({0.5 + 0.42 * std::cos(phi), 0.5 + 0.42 * std::sin(phi), 0.08 * std::sin(phi * 0.8)});
    }
    return p;
}

Pts path_s() {
    Pts p;
    const P3 c1{0.5, 0, 0.74}, c2{0.5, 0, 0.26};
    const double r = 0.24;
    for (int i = 0; i <= 90; ++i) {  // upper circle, 270 degrees counter-clockwise
        double phi = 1.5 * kPi * i / 90.0;
        p.push_back(c1 + P3{r * std::cos(phi), 0, r * std::sin(phi)});
    }
    for (int i = 1; i <= 90; ++i) {  // lower circle, 270 degrees clockwise from its top
        double phi = 0.5 * kPi - 1.5 * kPi * i / 90.0;
        p.push_back(c2 + P3{r * std::cos(phi), 0, r * std::sin(phi)});
    }
    return p;
}

Pts path_triangle() {
    const P3 a{0.5, 0, 0.93}, b{0.07, 0, 0.18}, c{0.93, 0, 0.18};
    P3 mid = 0.5 * (c + a);
    Pts p{mid};
    line_to(p, a);
    line_to(p, b);
    line_to(p, c);
    line_to(p, mid);
    return p;
}

void bezier_to(Pts& pts, const P3& ctrl, const P3& to, int steps = 24) {
    P3 from = pts.back();
    for (int i = 1; i <= steps; ++i) {
        double u = double(i) / steps;
        pts.push_back((1 - u) * (1 - u) * from + 2 * (1 - u) * u * ctrl + u * u * to);
    }
}

Pts path_drink() {  // reach, lift to the mouth, tip, return
    Pts p{{0.05, 0.30, 0.25}};
    line_to(p, {0.50, 0.75, 0.08});
    bezier_to(p, {0.75, 0.60, 0.55}, {0.30, 0.35, 0.85});
    for (int i = 1; i <= 16; ++i) {  // small tipping arc at the mouth
        double phi = kPi * i / 16.0;
        p.push_back(P3{0.30, 0.35, 0.85} + 0.08 * P3{std::sin(phi), 0.3 * std::sin(phi), std::sin(phi) * std::cos(phi)});
    }
    bezier_to(p, {0.70, 0.55, 0.45}, {0.50, 0.75, 0.08});
    line_to(p, {0.05, 0.30, 0.25});
    return p;
}

Pts path_knock() {
    Pts p{{0.05, 0.45, 0.55}};
    line_to(p, {0.50, 0.50, 0.60});
    for (int k = 0; k < 3; ++k) {  // three sharp forward-back raps
        line_to(p, {0.95, 0.52, 0.50});
        line_to(p, {0.55, 0.48, 0.58});
    }
    return p;
}

Pts path_throw() {
    Pts p{{0.70, 0.45, 0.35}};
    for (int i = 1; i <= 30; ++i) {  // wind-up arc back over the shoulder
        double phi = kPi * 0.8 * i / 30.0;
        p.push_back({0.70 - 0.45 * std::sin(phi), 0.45 + 0.10 * std::sin(phi), 0.35 + 0.45 * (1 - std::cos(phi))});
    }
    line_to(p, {0.95, 0.60, 0.55});  // release
    line_to(p, {0.85, 0.65, 0.15});  // follow-through
    return p;
}

Pts path_wave() {
    Pts p;
    auto arc = [&](double u) {
        return P3{0.5 - 0.42 * std::cos(kPi * u), 0.5, 0.42 + 0.40 * std::sin(kPi * u)};
    };
    for (int sweep = 0; sweep < 3; ++sweep)
        for (int i = sweep == 0 ? 0 : 1; i <= 40; ++i) {
            double u = double(i) / 40.0;
            p.push_back(arc(sweep % 2 == 0 ? u : 1.0 - u));
        }
    return p;
}

void fit_unit_box(Pts& pts) {
    P3 lo = pts.front(), hi = lo;
    for (const auto& q : pts) {
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    double span = (hi - lo).maxCoeff();
    if (span <= 0) return;
    for (auto& q : pts) q = (q - lo) / span;
}

}  // namespace

PathTemplate task_path(TaskKind task) {
    if (!task.valid()) throw SchemaViolation("invalid task kind");
    Pts pts;
    switch (task.name) {
        case TaskName::Lw: pts = path_lw(); break;
        case TaskName::Star: pts = path_star(); break;
        case TaskName::Stir: pts = path_stir(); break;
        case TaskName::S: pts = path_s(); break;
        case TaskName::Triangle: pts = path_triangle(); break;
        case TaskName::Drink: pts = path_drink(); break;
        case TaskName::Knock: pts = path_knock(); break;
        case TaskName::Throw: pts = path_throw(); break;
        case TaskName::Wave: pts = path_wave(); break;
    }
    const bool traced = task.category == TaskCategory::LineTracing;
    // drawing tasks (the ones with a tracing variant) live on a common easel
    // plane tilted askew of the robot frame, whether traced on it or drawn
    // just in front of it; gestures keep their free 3-D form
    const bool drawing = TaskKind{task.name, TaskCategory::LineTracing}.valid();
    P3 normal = P3::Zero();
    if (drawing) {
        int flat_axis = task.name == TaskName::Stir ? 2 : 1;
        for (auto& q : pts) q[flat_axis] = 0.0;
        Eigen::Matrix3d tilt(Eigen::AngleAxisd(18.0 * kPi / 180.0, P3::UnitX()) *
                             Eigen::AngleAxisd(12.0 * kPi / 180.0, P3::UnitZ()));
        for (auto& q : pts) q = tilt * q;
        normal = tilt * P3::Unit(flat_axis);
    }
    fit_unit_box(pts);

    PathTemplate p;
    p.traced = traced;
    p.surface_normal = normal;
    p.points = std::move(pts);
    p.cumlen.resize(p.points.size(), 0.0);
    for (size_t i = 1; i < p.points.size(); ++i)
        p.cumlen[i] = p.cumlen[i - 1] + (p.points[i] - p.points[i - 1]).norm();
    return p;
}

// ---------------------------------------------------------------------------
// Perturbation
// ---------------------------------------------------------------------------

namespace {

// Band-limited noise as a small sum of seeded sinusoids.
struct SinusoidBank {
    struct Term {
        double amp, freq, phase;
    };
    std::array<std::vector<Term>, 3> axes;

    static SinusoidBank make(Rng& rng, int per_axis, double amp, double f_lo, double f_hi) {
        SinusoidBank b;
        for (auto& axis : b.axes)
            for (int k = 0; k < per_axis; ++k)
                axis.push_back({amp / per_axis, rng.uniform(f_lo, f_hi), rng.uniform(0.0, kTau)});
        return b;
    }
    P3 eval(double t) const {
        P3 out = P3::Zero();
        for (int a = 0; a < 3; ++a)
            for (const auto& s : axes[a]) out[a] += s.amp * std::sin(kTau * s.freq * t + s.phase);
        return out;
    }
};

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

}  // namespace

EndEffectorStream perturb(const PathTemplate& path, const EmotionProfile& profile,
                          const SubjectStyle& style, std::uint64_t seed) {
    profile.validate();
    if (path.points.size() < 2) throw SchemaViolation("path template needs at least 2 points");
    Rng rng(seed);

    // per-instance variation of the key magnitudes
    const double jitter_v = std::exp(rng.uniform(-0.08, 0.08));
    const double jitter_j = std::exp(rng.uniform(-0.08, 0.08));
    const double trace_damp = path.traced ? 0.55 : 1.0;

    const double L = path.length() * kTaskScale;
    const double v_nom = kBaseSpeed * profile.speed_scale * style.speed_mult * jitter_v;
    const double v_eff = v_nom / profile.duration_scale;
    const double jerk_amp = profile.jerk_noise_amp * style.jerk_mult * jitter_j * trace_damp;

    // wander displacement amplitude chosen so its third derivative lands near
    // jerk_amp for mid-band frequencies
    const double f_mid = 1.6;
    const double wander_amp = jerk_amp / std::pow(kTau * f_mid, 3.0);
    auto wander = SinusoidBank::make(rng, 3, wander_amp, 0.8, 1.8);
    // tremor amplitude falls with frequency cubed so its jerk stays a fixed
    // quarter of the wander's, whatever the tremor band
    const double tremor_f = profile.tremor_freq * style.tremor_mult;
    const double tremor_amp =
        0.25 * wander_amp * std::pow(f_mid / std::max(tremor_f, 0.3), 3.0);
    auto tremor = SinusoidBank::make(rng, 2, tremor_amp, tremor_f * 0.9, tremor_f * 1.1);

    // multiplicative speed wobble, peak fraction tied to arousal via jerk_amp
    const double sigma_v = std::min(0.40, 0.04 + 0.018 * profile.jerk_noise_amp * jitter_j);
    std::array<SinusoidBank::Term, 3> wobble;
    for (auto& w : wobble) w = {sigma_v / 3.0, rng.uniform(0.3, 0.9), rng.uniform(0.0, kTau)};

    // stroke-boundary dwells: calm movers stop at corners, decided up front in
    // corner order so the draw sequence never depends on acceptance
    struct Dwell {
        double arc;
        double dur;
    };
    std::vector<Dwell> dwells;
    const double p_corner = std::min(0.85, 6.0 * profile.pause_prob);
    for (size_t i = 1; i + 1 < path.points.size(); ++i) {
        P3 d0 = path.points[i] - path.points[i - 1];
        P3 d1 = path.points[i + 1] - path.points[i];
        if (d0.norm() < 1e-12 || d1.norm() < 1e-12) continue;
        double cosang = std::clamp(d0.dot(d1) / (d0.norm() * d1.norm()), -1.0, 1.0);
        if (std::acos(cosang) < 25.0 * kPi / 180.0) continue;
        double u = rng.uniform();
        double dur = rng.uniform(0.15, 0.35) * profile.duration_scale;
        if (u < p_corner) dwells.push_back({path.cumlen[i], dur});
    }

    // abrupt movers start and stop harder; gentle ones glide in and out
    const double ease_frac =
        std::clamp(0.10 / (1.0 + 0.6 * profile.jerk_noise_amp), 0.015, 0.10);
    const double ease_len = ease_frac * L;
    // corners get rounded by the centripetal limit of a fast hand; the factor
    // vanishes with the noise scale so a noise-free profile stays on the path
    const double w_round =
        std::min(1.0, profile.jerk_noise_amp / 0.3) * v_eff * v_eff / 3.0 / kTaskScale;

    const double dt = 1.0 / kSynthRate;
    double sigma = 0.0;
    double pause_left = 0.0, pause_total = 0.0;
    size_t next_dwell = 0;

    EndEffectorStream out;
    // traced drawings keep residual noise mostly on the surface
    const bool on_surface = path.traced && path.surface_normal.norm() > 0.5;
    const P3 n_hat = on_surface ? P3(path.surface_normal.normalized()) : P3(P3::Zero());
    auto damp = [&](const P3& noise) {
        return on_surface ? P3(noise - 0.8 * n_hat * n_hat.dot(noise)) : noise;
    };
    auto sample_path = [&](double arc) {
        if (w_round <= 0) return path.at(arc);
        return P3(0.25 * path.at(arc - w_round) + 0.5 * path.at(arc) +
                  0.25 * path.at(arc + w_round));
    };

    for (long i = 0; sigma < L && i < 200000; ++i) {
        const double t = i * dt;
        P3 noise = damp(wander.eval(t) + tremor.eval(t));
        P3 p = kTaskCenter + kTaskScale * (sample_path(sigma / kTaskScale) - P3::Constant(0.5)) +
               noise;
        out.samples.push_back({t, p});

        double wob = 0.0;
        for (const auto& w : wobble) wob += w.amp * std::sin(kTau * w.freq * t + w.phase);
        double ease = smoothstep(sigma / ease_len) * smoothstep((L - sigma) / ease_len);
        double g = 1.0;
        if (pause_left > 0.0) {
            g = 0.03 + 0.97 * smoothstep(1.0 - pause_left / pause_total);
            pause_left -= dt;
        } else if (next_dwell < dwells.size() && sigma / kTaskScale >= dwells[next_dwell].arc) {
            pause_total = dwells[next_dwell].dur;
            pause_left = pause_total;
            ++next_dwell;
        } else if (rng.uniform() < profile.pause_prob * dt) {
            pause_total = rng.uniform(0.15, 0.4);
            pause_left = pause_total;
        }
        double v = v_eff * (1.0 + wob) * ease * g;
        sigma += std::max(v, 0.02 * v_eff) * dt;
    }
    // close exactly on the endpoint so every run covers the full template
    double t_end = out.samples.back().t + dt;
    out.samples.push_back(
        {t_end, kTaskCenter + kTaskScale * (sample_path(path.length()) - P3::Constant(0.5)) +
                    damp(wander.eval(t_end) + tremor.eval(t_end))});
    return out;
}

// ---------------------------------------------------------------------------
// Kinematic chain
// ---------------------------------------------------------------------------

namespace {

struct FkResult {
    P3 ee;
    std::array<P3, 6> origins;
    std::array<P3, 6> axes;
};

FkResult fk_full(const ArmModel& arm, const Vector6d& q) {
    // Joint axes: q1 yaw (z), q2..q4 pitch (y), q5 roll about the forearm (z
    // again for variety), q6 pitch. Links extend along local x.
    FkResult r;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    P3 p = arm.base + P3{0, 0, arm.links[0]};
    auto rot = [](const P3& axis, double a) { return Eigen::AngleAxisd(a, axis).toRotationMatrix(); };
    const std::array<P3, 6> local_axis = {P3::UnitZ(), P3::UnitY(), P3::UnitY(),
                                          P3::UnitY(), P3::UnitZ(), P3::UnitY()};
    for (int j = 0; j < 6; ++j) {
        r.origins[j] = p;
        r.axes[j] = R * local_axis[j];
        R = R * rot(local_axis[j], q[j]);
        if (j >= 1) p += R * P3{arm.links[j], 0, 0};  // link j extends after joint j (j>=1)
    }
    r.ee = p;
    return r;
}

}  // namespace

Eigen::Vector3d forward_kinematics(const ArmModel& arm, const Vector6d& q) {
    return fk_full(arm, q).ee;
}

std::pair<JointStream, EndEffectorStream> track(const ArmModel& arm, const EndEffectorStream& hand) {
    hand.validate();
    const P3 shoulder = arm.base + P3{0, 0, arm.links[0]};
    const double reach = arm.max_reach();
    for (const auto& s : hand.samples)
        if ((s.p - shoulder).norm() > 0.99 * reach)
            throw OutOfWorkspace("target " + format_g9((s.p - shoulder).norm()) +
                                 " m from shoulder exceeds reach " + format_g9(reach) + " m");

    Vector6d q;
    q << 0.0, -0.7, 1.4, -0.7, 0.0, 0.0;  // elbow-up home pose
    const double lambda2 = 0.01 * 0.01;

    JointStream joints;
    EndEffectorStream ee;
    joints.samples.reserve(hand.samples.size());
    ee.samples.reserve(hand.samples.size());

    bool first = true;
    for (const auto& target : hand.samples) {
        const int iters = first ? 400 : 25;
        FkResult f = fk_full(arm, q);
        for (int it = 0; it < iters; ++it) {
            P3 err = target.p - f.ee;
            if (err.norm() < 1e-8) break;
            Eigen::Matrix<double, 3, 6> J;
            for (int j = 0; j < 6; ++j) J.col(j) = f.axes[j].cross(f.ee - f.origins[j]);
            Eigen::Matrix3d A = J * J.transpose() + lambda2 * Eigen::Matrix3d::Identity();
            Vector6d dq = J.transpose() * A.ldlt().solve(err);
            double n = dq.norm();
            if (n > 0.5) dq *= 0.5 / n;  // trust region keeps steps sane
            q += dq;
            for (int j = 0; j < 6; ++j) q[j] = std::clamp(q[j], arm.joint_limits[j].first,
                                                          arm.joint_limits[j].second);
            f = fk_full(arm, q);
        }
        if ((target.p - f.ee).norm() >= 0.005)
            throw IkDivergence("tracking error " + format_g9((target.p - f.ee).norm()) + " m at t=" +
                               format_g9(target.t));
        joints.samples.push_back({target.t, q});
        ee.samples.push_back({target.t, f.ee});
        first = false;
    }
    return {std::move(joints), std::move(ee)};
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

Dataset gen_dataset(int n_subjects, const std::vector<TaskKind>& tasks, int reps_per_cell,
                    std::uint64_t seed) {
    if (n_subjects < 1 || reps_per_cell < 1 || tasks.empty())
        throw SchemaViolation("all generation counts must be at least 1");
    for (const auto& t : tasks)
        if (!t.valid()) throw SchemaViolation("invalid task kind");

    const ArmModel arm = default_arm();
    std::vector<TaskInstance> instances;
    instances.reserve(size_t(n_subjects) * tasks.size() * 5 * size_t(reps_per_cell));

    for (int s = 0; s < n_subjects; ++s) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "s%02d", s + 1);
        SubjectStyle style = subject_style(buf, mix_seed(seed, {0xA1, std::uint64_t(s)}));
        for (size_t ti = 0; ti < tasks.size(); ++ti) {
            PathTemplate path = task_path(tasks[ti]);
            for (Emotion e : kAllEmotions) {
                const auto& profile = default_profile(e);
                for (int rep = 0; rep < reps_per_cell; ++rep) {
                    std::uint64_t cell_seed = mix_seed(
                        seed, {0xB2, std::uint64_t(s), std::uint64_t(ti),
                               std::uint64_t(static_cast<int>(e)), std::uint64_t(rep)});
                    EndEffectorStream hand = perturb(path, profile, style, cell_seed);
                    auto [joints, ee] = track(arm, hand);
                    TaskInstance inst;
                    inst.subject_id = buf;
                    inst.task = tasks[ti];
                    inst.label = e;
                    inst.repetition = rep;
                    inst.ee = std::move(ee);
                    inst.joints = std::move(joints);
                    inst.validate();
                    instances.push_back(std::move(inst));
                }
            }
        }
    }
    return Dataset::from_instances(std::move(instances));
}

}  // namespace emokin
