#pragma once

#include <iosfwd>

#include "emokin/cnn.hpp"
#include "emokin/dtw.hpp"
#include "emokin/eval.hpp"
#include "emokin/polar.hpp"

namespace emokin {

/// Standard classifier inputs derived from a raw instance. stride keeps every
/// stride-th feature frame after derivatives are taken at the true rate.
FrameSeq dtw_input(const TaskInstance& instance, double rate = kDefaultSampleRate,
                   int stride = 1);
PolarImage cnn_input(const TaskInstance& instance, double rate = kDefaultSampleRate);

struct DtwPipelineConfig {
    int k_per_class = 1;
    int band = -1;
    int stride = 1;
    double rate = kDefaultSampleRate;
};

/// Fold trainers for the evaluation harness. Each call trains on the fold's
/// train indices and returns a predictor over raw instances.
TrainerFn make_dtw_trainer(DtwPipelineConfig cfg = {});
TrainerFn make_cnn_trainer(CnnArchitecture arch, TrainConfig cfg,
                           std::ostream* progress = nullptr);

}  // namespace emokin
