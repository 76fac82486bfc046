#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "emokin/telemetry.hpp"

namespace emokin {

enum class Protocol { SubjectDependent, LeaveOneSubjectOut };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

/// One cross-validation fold over dataset indices.
struct Fold {
    std::string name;  // subject id for both protocols
    std::vector<size_t> train;
    std::vector<size_t> test;

    bool operator==(const Fold&) const = default;
};

struct SplitPlan {
    Protocol protocol = Protocol::SubjectDependent;
    std::vector<Fold> folds;
    std::uint64_t seed = 0;

    bool operator==(const SplitPlan&) const = default;
};

/// Subject-dependent: one fold per subject, each (subject, class) cell split
/// 50/50 with the larger half in training. Leave-one-subject-out: one fold per
/// held-out subject.
SplitPlan make_splits(const Dataset& dataset, Protocol protocol, std::uint64_t seed);

struct Prediction {
    Emotion truth = Emotion::Neutral;
    Emotion predicted = Emotion::Neutral;
    std::string task;     // task kind id, e.g. "lw_air"
    std::string subject;

    bool operator==(const Prediction&) const = default;
};

struct FoldScore {
    std::string name;
    long correct = 0;
    long total = 0;

    bool operator==(const FoldScore&) const = default;
};

struct EvalReport {
    std::vector<Emotion> classes;           // row/column order of confusion
    Eigen::MatrixXi confusion;              // rows true, columns predicted
    double accuracy_overall = 0.0;
    std::map<std::string, double> accuracy_by_task;
    std::map<Emotion, double> accuracy_by_emotion;   // per-class recall
    std::map<int, double> accuracy_by_class_count;   // filled by the subset sweep
    std::vector<FoldScore> folds;

    bool operator==(const EvalReport&) const = default;
};

/// Tally predictions into a report. The explicit-class overload fixes the
/// confusion layout; the other infers classes from the predictions.
EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<Emotion>& classes);
EvalReport evaluate(const std::vector<Prediction>& predictions);

/// Trains on the given dataset indices and returns a predictor.
using PredictFn = std::function<Emotion(const TaskInstance&)>;
using TrainerFn = std::function<PredictFn(const Dataset&, const std::vector<size_t>&)>;

/// Runs every fold of the plan, training once per fold. Folds run on up to
/// `threads` workers; output order is by fold then test position regardless.
std::vector<Prediction> run_folds(const Dataset& dataset, const SplitPlan& plan,
                                  const TrainerFn& trainer, int threads = 1);

/// run_folds + evaluate, with per-fold scores attached.
EvalReport run_protocol(const Dataset& dataset, const SplitPlan& plan, const TrainerFn& trainer,
                        int threads = 1);

/// Retrains and evaluates on label subsets of decreasing arousal coverage,
/// keyed by subset size.
std::map<int, double> class_subset_sweep(const Dataset& dataset, const TrainerFn& trainer,
                                         Protocol protocol, std::uint64_t seed,
                                         const std::vector<std::vector<Emotion>>& subsets,
                                         int threads = 1);

/// {Annoyance, Neutral} then widening: sizes 2, 3, 4, 5.
std::vector<std::vector<Emotion>> default_subset_sequence();

enum class ReportFormat { Csv, Markdown };

/// Accuracies as 4-decimal cells; empty sections omitted.
void emit_report(const EvalReport& report, const std::string& path, ReportFormat format);
std::string render_report(const EvalReport& report, ReportFormat format);

}  // namespace emokin
