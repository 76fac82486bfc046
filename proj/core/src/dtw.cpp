#include "emokin/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "emokin/errors.hpp"

namespace emokin {

using nlohmann::json;

FrameSeq frame_stack(const FeatureBundle& bundle) {
    const size_t frames = bundle.curv.size();  // n-2
    FrameSeq m(kDtwChannels, static_cast<Eigen::Index>(frames));
    for (size_t f = 0; f < frames; ++f) {
        for (int k = 0; k < 12; ++k) m(k, f) = bundle.kinematic[k][f + 1];
        m(12, f) = bundle.kinematic[12][f];  // step ending at the center sample
        m(13, f) = bundle.slope[f];
        m(14, f) = bundle.curv[f];
    }
    return m;
}

double dtw_distance(const FrameSeq& a, const FrameSeq& b, int band) {
    if (a.cols() == 0 || b.cols() == 0) throw EmptySequence("dtw over an empty sequence");
    if (a.rows() != b.rows())
        throw ChannelMismatch(std::to_string(a.rows()) + " vs " + std::to_string(b.rows()) + " channels");
    const Eigen::Index n = a.cols(), m = b.cols();
    constexpr double kInf = std::numeric_limits<double>::infinity();

    auto window = [&](Eigen::Index i) -> std::pair<Eigen::Index, Eigen::Index> {
        if (band < 0) return {0, m - 1};
        double center = n > 1 ? double(i) * double(m - 1) / double(n - 1) : 0.0;
        auto lo = static_cast<Eigen::Index>(std::ceil(center - band));
        auto hi = static_cast<Eigen::Index>(std::floor(center + band));
        return {std::max<Eigen::Index>(0, lo), std::min(m - 1, hi)};
    };

    std::vector<double> prev(static_cast<size_t>(m), kInf), cur(static_cast<size_t>(m), kInf);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [lo, hi] = window(i);
        std::fill(cur.begin(), cur.end(), kInf);
        for (Eigen::Index j = lo; j <= hi; ++j) {
            double cost = (a.col(i) - b.col(j)).norm();
            if (i == 0 && j == 0) {
                cur[0] = cost;
                continue;
            }
            double best = kInf;
            if (i > 0 && j > 0) best = prev[j - 1];
            if (i > 0) best = std::min(best, prev[j]);
            if (j > 0) best = std::min(best, cur[j - 1]);
            cur[j] = best + cost;
        }
        std::swap(prev, cur);
    }
    return prev[static_cast<size_t>(m - 1)];
}

FrameSeq ChannelNorm::apply(const FrameSeq& seq) const {
    if (seq.rows() != mean.size())
        throw ChannelMismatch("sequence has " + std::to_string(seq.rows()) + " channels, norm has " +
                              std::to_string(mean.size()));
    FrameSeq out = seq;
    for (Eigen::Index c = 0; c < seq.rows(); ++c) {
        if (stddev[c] == 0.0) continue;  // flat training channel, pass through
        out.row(c) = (seq.row(c).array() - mean[c]) / stddev[c];
    }
    return out;
}

ChannelNorm fit_channel_norm(const std::vector<FrameSeq>& sequences) {
    if (sequences.empty()) throw EmptySequence("no sequences to fit normalization on");
    const Eigen::Index channels = sequences.front().rows();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(channels);
    long total = 0;
    for (const auto& s : sequences) {
        if (s.rows() != channels) throw ChannelMismatch("inconsistent channel counts in training data");
        sum += s.rowwise().sum();
        sumsq += s.array().square().rowwise().sum().matrix();
        total += s.cols();
    }
    if (total == 0) throw EmptySequence("no frames in training data");
    ChannelNorm norm;
    norm.mean = sum / double(total);
    Eigen::VectorXd var = sumsq / double(total) - norm.mean.array().square().matrix();
    norm.stddev = var.cwiseMax(0.0).cwiseSqrt();
    return norm;
}

DtwModel select_templates(const std::vector<std::pair<FrameSeq, Emotion>>& training,
                          int k_per_class, int band) {
    if (k_per_class < 1) throw InsufficientClassData("k_per_class must be at least 1");
    if (training.empty()) throw InsufficientClassData("empty training set");

    std::map<Emotion, std::vector<size_t>> by_class;
    for (size_t i = 0; i < training.size(); ++i) by_class[training[i].second].push_back(i);

    DtwModel model;
    model.k_per_class = k_per_class;
    model.band = band;
    std::vector<FrameSeq> all;
    all.reserve(training.size());
    for (const auto& [seq, label] : training) all.push_back(seq);
    model.norm = fit_channel_norm(all);
    for (auto& seq : all) seq = model.norm.apply(seq);

    for (Emotion e : kAllEmotions) {
        auto it = by_class.find(e);
        if (it == by_class.end()) continue;
        const auto& idx = it->second;
        if (idx.size() < static_cast<size_t>(k_per_class))
            throw InsufficientClassData(std::string(to_string(e)) + " has " + std::to_string(idx.size()) +
                                        " instances, need " + std::to_string(k_per_class));
        const size_t c = idx.size();
        std::vector<double> sums(c, 0.0);
        for (size_t i = 0; i < c; ++i)
            for (size_t j = i + 1; j < c; ++j) {
                double d = dtw_distance(all[idx[i]], all[idx[j]], band);
                sums[i] += d;
                sums[j] += d;
            }
        std::vector<size_t> order(c);
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t x, size_t y) { return sums[x] < sums[y]; });
        model.classes.push_back(e);
        auto& slots = model.templates[e];
        for (int k = 0; k < k_per_class; ++k) slots.push_back(all[idx[order[k]]]);
    }
    return model;
}

DtwClassification classify(const DtwModel& model, const FrameSeq& instance) {
    FrameSeq z = model.norm.apply(instance);
    DtwClassification out;
    bool first = true;
    for (Emotion e : model.classes) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& tpl : model.templates.at(e))
            best = std::min(best, dtw_distance(z, tpl, model.band));
        out.scores[e] = best;
        if (first || best < out.scores.at(out.label)) {
            out.label = e;
            first = false;
        }
    }
    return out;
}

void save_dtw_model(const DtwModel& model, const std::filesystem::path& path) {
    json doc;
    doc["format"] = "dtw-v1";
    doc["k_per_class"] = model.k_per_class;
    doc["band"] = model.band;
    doc["channels"] = model.norm.mean.size();
    doc["norm"]["mean"] = std::vector<double>(model.norm.mean.data(),
                                             model.norm.mean.data() + model.norm.mean.size());
    doc["norm"]["std"] = std::vector<double>(model.norm.stddev.data(),
                                             model.norm.stddev.data() + model.norm.stddev.size());
    json tpls = json::array();
    for (Emotion e : model.classes)
        for (const auto& t : model.templates.at(e)) {
            json entry;
            entry["label"] = std::string(to_string(e));
            entry["frames"] = t.cols();
            std::vector<double> data;
            data.reserve(static_cast<size_t>(t.size()));
            for (Eigen::Index c = 0; c < t.rows(); ++c)
                for (Eigen::Index f = 0; f < t.cols(); ++f) data.push_back(t(c, f));
            entry["data"] = std::move(data);
            tpls.push_back(std::move(entry));
        }
    doc["templates"] = std::move(tpls);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw IoFailure("write failed for " + path.string());
}

DtwModel load_dtw_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw SchemaViolation(path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "dtw-v1")
            throw VersionMismatch("unsupported model format '" + doc.at("format").get<std::string>() + "'");
        DtwModel model;
        model.k_per_class = doc.at("k_per_class").get<int>();
        model.band = doc.at("band").get<int>();
        const auto channels = doc.at("channels").get<Eigen::Index>();
        auto mean = doc.at("norm").at("mean").get<std::vector<double>>();
        auto stddev = doc.at("norm").at("std").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(mean.size()) != channels ||
            static_cast<Eigen::Index>(stddev.size()) != channels)
            throw SchemaViolation("normalization arity disagrees with channel count");
        model.norm.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), channels);
        model.norm.stddev = Eigen::Map<Eigen::VectorXd>(stddev.data(), channels);
        for (const auto& entry : doc.at("templates")) {
            auto label = emotion_from_string(entry.at("label").get<std::string>());
            if (!label) throw SchemaViolation("unknown template label");
            auto frames = entry.at("frames").get<Eigen::Index>();
            auto data = entry.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != channels * frames)
                throw SchemaViolation("template payload size mismatch");
            FrameSeq t(channels, frames);
            size_t k = 0;
            for (Eigen::Index c = 0; c < channels; ++c)
                for (Eigen::Index f = 0; f < frames; ++f) t(c, f) = data[k++];
            if (model.templates.find(*label) == model.templates.end()) model.classes.push_back(*label);
            model.templates[*label].push_back(std::move(t));
        }
        return model;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaViolation(path.string() + ": " + e.what());
    }
}

}  // namespace emokin
