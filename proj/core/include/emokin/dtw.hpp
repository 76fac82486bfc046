#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "emokin/features.hpp"
#include "emokin/telemetry.hpp"

namespace emokin {

/// One multichannel sequence: channels x frames, column per time step.
using FrameSeq = Eigen::MatrixXd;

inline constexpr int kDtwChannels = 15;  // 13 kinematic + slope angle + curvature

/// Stack the sequence features of a bundle into a 15-channel frame matrix.
/// Frame f is centered on sample f+1, so the shorter difference-based
/// channels line up with the pointwise ones; frame count is n-2.
FrameSeq frame_stack(const FeatureBundle& bundle);

/// Dynamic time warping distance with the match/insert/delete step set,
/// Euclidean frame cost, unnormalized cumulative sum. band < 0 means the full
/// matrix; otherwise cells farther than band from the slope-corrected
/// diagonal are unreachable.
/// Throws EmptySequence and ChannelMismatch.
double dtw_distance(const FrameSeq& a, const FrameSeq& b, int band = -1);

/// Per-channel z-scoring statistics fitted on training frames. Channels whose
/// training std is zero are passed through untouched.
struct ChannelNorm {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    FrameSeq apply(const FrameSeq& seq) const;  // throws ChannelMismatch
};

ChannelNorm fit_channel_norm(const std::vector<FrameSeq>& sequences);

struct DtwModel {
    int k_per_class = 1;
    int band = -1;
    ChannelNorm norm;
    std::vector<Emotion> classes;  // labels present, declaration order
    std::map<Emotion, std::vector<FrameSeq>> templates;  // stored normalized
};

/// Pick the k_per_class medoids of every class: the training sequences with
/// the smallest summed DTW distance to their same-class peers (ties broken by
/// lowest training index). Fits the channel normalization on all training
/// frames first. Throws InsufficientClassData.
DtwModel select_templates(const std::vector<std::pair<FrameSeq, Emotion>>& training,
                          int k_per_class, int band = -1);

struct DtwClassification {
    Emotion label = Emotion::Joy;
    std::map<Emotion, double> scores;  // min template distance per class
};

/// Nearest-template classification; ties resolved by class declaration order.
DtwClassification classify(const DtwModel& model, const FrameSeq& instance);

/// JSON container, format tag "dtw-v1", exact round-trip.
void save_dtw_model(const DtwModel& model, const std::filesystem::path& path);
DtwModel load_dtw_model(const std::filesystem::path& path);

}  // namespace emokin
