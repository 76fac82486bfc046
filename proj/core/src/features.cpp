#include "emokin/features.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "emokin/errors.hpp"

namespace emokin {
namespace {

std::vector<Eigen::Vector3d> central_diff(const std::vector<Eigen::Vector3d>& v,
                                          const std::vector<double>& t) {
    size_t n = v.size();
    std::vector<Eigen::Vector3d> out(n);
    for (size_t i = 0; i < n; ++i) {
        size_t lo = i == 0 ? 0 : i - 1;
        size_t hi = i + 1 == n ? n - 1 : i + 1;
        out[i] = (v[hi] - v[lo]) / (t[hi] - t[lo]);
    }
    return out;
}

double mean_of(const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return s / double(x.size());
}

double pop_variance(const std::vector<double>& x, double mu) {
    double s = 0;
    for (double v : x) s += (v - mu) * (v - mu);
    return s / double(x.size());
}

}  // namespace

Derivatives derivatives(const EndEffectorStream& segment) {
    const auto& s = segment.samples;
    if (s.size() < 8) throw TooShort("derivatives need at least 8 samples, got " + std::to_string(s.size()));
    std::vector<double> t(s.size());
    std::vector<Eigen::Vector3d> p(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        t[i] = s[i].t;
        p[i] = s[i].p;
    }
    Derivatives d;
    d.velocity = central_diff(p, t);
    d.acceleration = central_diff(d.velocity, t);
    d.jerk = central_diff(d.acceleration, t);
    return d;
}

std::vector<double> position_difference(const EndEffectorStream& segment) {
    const auto& s = segment.samples;
    if (s.size() < 2) throw TooShort("position_difference needs at least 2 samples");
    std::vector<double> out(s.size() - 1);
    for (size_t i = 0; i + 1 < s.size(); ++i) out[i] = (s[i + 1].p - s[i].p).norm();
    return out;
}

std::vector<double> slope_angle(const EndEffectorStream& segment) {
    const auto& s = segment.samples;
    if (s.size() < 2) throw TooShort("slope_angle needs at least 2 samples");
    std::vector<double> out(s.size() - 1);
    for (size_t i = 0; i + 1 < s.size(); ++i) {
        Eigen::Vector3d d = s[i + 1].p - s[i].p;
        double horiz = std::hypot(d.x(), d.y());
        out[i] = (horiz == 0.0 && d.z() == 0.0) ? 0.0 : std::atan2(d.z(), horiz);
    }
    return out;
}

std::vector<double> curvature(const EndEffectorStream& segment) {
    const auto& s = segment.samples;
    if (s.size() < 3) throw TooShort("curvature needs at least 3 samples");
    std::vector<double> out(s.size() - 2);
    for (size_t i = 0; i + 2 < s.size(); ++i) {
        Eigen::Vector3d a = s[i + 1].p - s[i].p;
        Eigen::Vector3d b = s[i + 2].p - s[i + 1].p;
        Eigen::Vector3d c = s[i + 2].p - s[i].p;
        double denom = a.norm() * b.norm() * c.norm();
        // kappa = 4 * triangle area / product of side lengths
        out[i] = denom == 0.0 ? 0.0 : 2.0 * a.cross(c).norm() / denom;
    }
    return out;
}

double energy_of_speeds(const std::vector<double>& speeds) {
    if (speeds.empty()) throw TooShort("empty speed series");
    double max_s = 0;
    for (double v : speeds) max_s = std::max(max_s, v);
    constexpr int kBins = 32;
    std::array<int, kBins> hist{};
    for (double v : speeds) {
        int bin = max_s == 0.0 ? 0 : std::min(kBins - 1, int(std::floor(v / max_s * kBins)));
        ++hist[bin];
    }
    double h = 0;
    double n = double(speeds.size());
    for (int c : hist)
        if (c > 0) {
            double p = c / n;
            h -= p * std::log2(p);
        }
    return h;
}

double energy(const EndEffectorStream& segment) {
    if (segment.samples.size() < 2) throw TooShort("energy needs at least 2 samples");
    return energy_of_speeds(speed_series(segment));
}

void FeatureBundle::validate() const {
    for (const auto& ch : kinematic)
        for (double v : ch)
            if (!std::isfinite(v)) throw SchemaViolation("non-finite kinematic value");
    for (double v : slope)
        if (!std::isfinite(v)) throw SchemaViolation("non-finite slope value");
    for (double v : curv)
        if (!std::isfinite(v)) throw SchemaViolation("non-finite curvature value");
    if (!std::isfinite(energy_bits) || !spatial_extent.allFinite() || !std::isfinite(time_range))
        throw SchemaViolation("non-finite scalar feature");
    if (!statics.allFinite()) throw SchemaViolation("non-finite static value");
}

FeatureBundle build_bundle(const EndEffectorStream& segment, const RawExtent& raw_extent) {
    FeatureBundle b;
    auto d = derivatives(segment);
    size_t n = segment.samples.size();
    for (int a = 0; a < 3; ++a) {
        b.kinematic[a].resize(n);
        b.kinematic[3 + a].resize(n);
        b.kinematic[6 + a].resize(n);
        b.kinematic[9 + a].resize(n);
        for (size_t i = 0; i < n; ++i) {
            b.kinematic[a][i] = segment.samples[i].p[a];
            b.kinematic[3 + a][i] = d.velocity[i][a];
            b.kinematic[6 + a][i] = d.acceleration[i][a];
            b.kinematic[9 + a][i] = d.jerk[i][a];
        }
    }
    b.kinematic[12] = position_difference(segment);
    b.slope = slope_angle(segment);
    b.curv = curvature(segment);
    b.energy_bits = energy(segment);
    b.spatial_extent = raw_extent.extent;
    b.time_range = raw_extent.duration;
    for (int k = 0; k < kKinematicChannels; ++k) {
        double mu = mean_of(b.kinematic[k]);
        double var = pop_variance(b.kinematic[k], mu);
        b.statics[3 * k] = mu;
        b.statics[3 * k + 1] = var;
        b.statics[3 * k + 2] = std::sqrt(var);
    }
    b.validate();
    return b;
}

FeatureBundle bundle_from_instance(const TaskInstance& instance, double rate) {
    RawExtent raw = raw_extent_of(instance.ee);
    auto seg = resample_uniform(instance.ee, rate);
    seg = align_origin(normalize_bbox(seg));
    return build_bundle(seg, raw);
}

PcaModel pca_fit(const std::vector<Vector39d>& statics, bool standardize) {
    if (statics.size() < 3)
        throw DegenerateData("need at least 3 vectors, got " + std::to_string(statics.size()));
    const auto n = static_cast<Eigen::Index>(statics.size());
    Eigen::MatrixXd X(n, 39);
    for (Eigen::Index i = 0; i < n; ++i) X.row(i) = statics[i].transpose();

    PcaModel m;
    m.mean = X.colwise().mean();
    X.rowwise() -= m.mean.transpose();
    m.standardized = standardize;
    if (standardize) {
        Eigen::VectorXd sd = (X.array().square().colwise().sum() / double(n - 1)).sqrt();
        for (int j = 0; j < 39; ++j) m.scale[j] = sd[j] > 0 ? sd[j] : 1.0;
        X.array().rowwise() /= m.scale.transpose().array();
    }

    Eigen::MatrixXd cov = X.transpose() * X / double(n - 1);
    if (cov.norm() == 0.0) throw DegenerateData("all input vectors identical");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw DegenerateData("eigendecomposition failed");

    // Eigenvalues come out ascending; take the top two, largest first.
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v = eig.eigenvectors().col(38 - k);
        int imax = 0;
        for (int j = 1; j < 39; ++j)
            if (std::abs(v[j]) > std::abs(v[imax])) imax = j;
        if (v[imax] < 0) v = -v;
        m.components.row(k) = v.transpose();
        m.explained_variance[k] = std::max(0.0, eig.eigenvalues()[38 - k]);
    }
    return m;
}

Eigen::Vector2d pca_project(const PcaModel& model, const Vector39d& statics) {
    Vector39d centered = statics - model.mean;
    if (model.standardized) centered = centered.cwiseQuotient(model.scale);
    return model.components * centered;
}

}  // namespace emokin
