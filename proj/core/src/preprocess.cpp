#include "emokin/preprocess.hpp"

#include <cmath>

#include "emokin/errors.hpp"

namespace emokin {

void SegmentationConfig::validate() const {
    if (!(speed_threshold > 0) || !std::isfinite(speed_threshold))
        throw SchemaViolation("speed_threshold must be positive");
    if (!(min_duration >= 0) || !std::isfinite(min_duration))
        throw SchemaViolation("min_duration must be non-negative");
    if (hysteresis_dwell < 1) throw SchemaViolation("hysteresis_dwell must be at least 1");
}

std::vector<double> speed_series(const EndEffectorStream& s) {
    const auto& v = s.samples;
    size_t n = v.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    for (size_t i = 0; i < n; ++i) {
        size_t lo = i == 0 ? 0 : i - 1;
        size_t hi = i + 1 == n ? n - 1 : i + 1;
        out[i] = (v[hi].p - v[lo].p).norm() / (v[hi].t - v[lo].t);
    }
    return out;
}

RawExtent raw_extent_of(const EndEffectorStream& s) {
    RawExtent r;
    Eigen::Vector3d lo = s.samples.front().p, hi = lo;
    for (const auto& smp : s.samples) {
        lo = lo.cwiseMin(smp.p);
        hi = hi.cwiseMax(smp.p);
    }
    r.extent = hi - lo;
    r.duration = s.duration();
    return r;
}

std::vector<Segment> segment(const EndEffectorStream& stream, const SegmentationConfig& cfg) {
    cfg.validate();
    stream.validate();
    const auto speed = speed_series(stream);
    const size_t n = speed.size();
    const size_t dwell = static_cast<size_t>(cfg.hysteresis_dwell);

    // run_above[i] = consecutive samples >= threshold ending at i, run_below the
    // complement. A segment opens where an above-run reaches dwell and closes
    // just before the start of the next dwell-long below-run.
    std::vector<Segment> out;
    size_t run_above = 0, run_below = 0;
    bool active = false;
    size_t start = 0;
    auto close = [&](size_t end_idx) {
        EndEffectorStream seg;
        seg.samples.assign(stream.samples.begin() + start, stream.samples.begin() + end_idx + 1);
        if (seg.duration() >= cfg.min_duration) out.push_back({seg, raw_extent_of(seg)});
        active = false;
    };
    for (size_t i = 0; i < n; ++i) {
        if (speed[i] >= cfg.speed_threshold) {
            ++run_above;
            run_below = 0;
        } else {
            ++run_below;
            run_above = 0;
        }
        if (!active && run_above == dwell) {
            active = true;
            start = i + 1 - dwell;
        } else if (active && run_below == dwell) {
            close(i - dwell);  // last sample before the below-run began
        }
    }
    if (active) close(n - 1);
    return out;
}

EndEffectorStream normalize_bbox(const EndEffectorStream& segment) {
    if (segment.samples.size() < 2) throw DegenerateSegment("need at least 2 samples");
    Eigen::Vector3d lo = segment.samples.front().p, hi = lo;
    for (const auto& s : segment.samples) {
        lo = lo.cwiseMin(s.p);
        hi = hi.cwiseMax(s.p);
    }
    Eigen::Vector3d ext = hi - lo;
    if ((ext.array() == 0.0).all()) throw DegenerateSegment("segment has zero extent on every axis");
    EndEffectorStream out = segment;
    for (auto& s : out.samples)
        for (int a = 0; a < 3; ++a)
            if (ext[a] > 0) s.p[a] = (s.p[a] - lo[a]) / ext[a];
    return out;
}

EndEffectorStream align_origin(const EndEffectorStream& segment) {
    if (segment.samples.empty()) return segment;
    EndEffectorStream out = segment;
    Eigen::Vector3d p0 = out.samples.front().p;
    for (auto& s : out.samples) s.p -= p0;
    return out;
}

namespace {

// Shared resampling core; V must support a*x + b*y.
template <typename Sample>
std::vector<Sample> resample_impl(const std::vector<Sample>& in, double rate, auto&& lerp) {
    double t0 = in.front().t, t1 = in.back().t;
    double span = t1 - t0;
    if (!(span > 1.0 / rate)) throw TooShort("segment spans " + format_g9(span) + " s, need more than 1/rate");
    // Count grid points inside [t0, t1], snapping near-integer spans onto the
    // final input timestamp.
    size_t count = static_cast<size_t>(std::floor(span * rate * (1.0 + 1e-12))) + 1;
    std::vector<Sample> out;
    out.reserve(count);
    size_t j = 0;
    for (size_t k = 0; k < count; ++k) {
        double t = t0 + static_cast<double>(k) / rate;
        if (t > t1) t = t1;
        while (j + 2 < in.size() && in[j + 1].t <= t) ++j;
        double u = (t - in[j].t) / (in[j + 1].t - in[j].t);
        out.push_back(lerp(in[j], in[j + 1], u, t));
    }
    return out;
}

}  // namespace

EndEffectorStream resample_uniform(const EndEffectorStream& segment, double rate) {
    segment.validate();
    if (!(rate > 0)) throw SchemaViolation("rate must be positive");
    if (segment.samples.size() < 2) throw TooShort("need at least 2 samples to resample");
    auto lerp = [](const EeSample& a, const EeSample& b, double u, double t) {
        return EeSample{t, (1.0 - u) * a.p + u * b.p};
    };
    return EndEffectorStream{resample_impl(segment.samples, rate, lerp)};
}

JointStream resample_uniform(const JointStream& segment, double rate) {
    segment.validate();
    if (!(rate > 0)) throw SchemaViolation("rate must be positive");
    if (segment.samples.size() < 2) throw TooShort("need at least 2 samples to resample");
    auto lerp = [](const JointSample& a, const JointSample& b, double u, double t) {
        JointSample s;
        s.t = t;
        s.q = (1.0 - u) * a.q + u * b.q;
        return s;
    };
    return JointStream{resample_impl(segment.samples, rate, lerp)};
}

}  // namespace emokin
