#include "emokin/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "emokin/errors.hpp"
#include "emokin/rng.hpp"

namespace emokin {

std::string to_string(Protocol p) {
    return p == Protocol::SubjectDependent ? "subject-dependent" : "loso";
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "subject-dependent") return Protocol::SubjectDependent;
    if (s == "loso") return Protocol::LeaveOneSubjectOut;
    throw SchemaViolation("unknown protocol: " + s);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

SplitPlan make_splits(const Dataset& dataset, Protocol protocol, std::uint64_t seed) {
    if (dataset.instances.empty()) throw InsufficientData("empty dataset");
    std::vector<std::string> subjects;
    for (const auto& inst : dataset.instances) {
        if (!inst.label) throw InsufficientData("unlabeled instance for subject " + inst.subject_id);
        subjects.push_back(inst.subject_id);
    }
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    std::map<std::string, size_t> subj_index;
    for (size_t i = 0; i < subjects.size(); ++i) subj_index[subjects[i]] = i;

    SplitPlan plan;
    plan.protocol = protocol;
    plan.seed = seed;

    if (protocol == Protocol::LeaveOneSubjectOut) {
        if (subjects.size() < 2)
            throw InsufficientData("leave-one-subject-out needs at least 2 subjects, have " +
                                   std::to_string(subjects.size()));
        plan.folds.resize(subjects.size());
        for (size_t i = 0; i < subjects.size(); ++i) plan.folds[i].name = subjects[i];
        for (size_t i = 0; i < dataset.instances.size(); ++i) {
            size_t s = subj_index.at(dataset.instances[i].subject_id);
            for (size_t f = 0; f < plan.folds.size(); ++f)
                (f == s ? plan.folds[f].test : plan.folds[f].train).push_back(i);
        }
        return plan;
    }

    // subject-dependent: stratify each (subject, class) cell 50/50
    std::map<std::pair<size_t, int>, std::vector<size_t>> cells;
    for (size_t i = 0; i < dataset.instances.size(); ++i)
        cells[{subj_index.at(dataset.instances[i].subject_id),
               static_cast<int>(*dataset.instances[i].label)}]
            .push_back(i);

    plan.folds.resize(subjects.size());
    for (size_t i = 0; i < subjects.size(); ++i) plan.folds[i].name = subjects[i];
    for (auto& [key, idx] : cells) {
        if (idx.size() < 2)
            throw InsufficientData("subject " + subjects[key.first] + " has only " +
                                   std::to_string(idx.size()) + " instance(s) of class " +
                                   std::string(to_string(static_cast<Emotion>(key.second))));
        Rng rng(mix_seed(seed, {0x5Dull, std::uint64_t(key.first), std::uint64_t(key.second)}));
        rng.shuffle(idx);
        size_t n_train = (idx.size() + 1) / 2;
        Fold& fold = plan.folds[key.first];
        fold.train.insert(fold.train.end(), idx.begin(), idx.begin() + n_train);
        fold.test.insert(fold.test.end(), idx.begin() + n_train, idx.end());
    }
    for (auto& fold : plan.folds) {
        std::sort(fold.train.begin(), fold.train.end());
        std::sort(fold.test.begin(), fold.test.end());
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<Emotion>& classes) {
    if (predictions.empty()) throw EmptyInput("no predictions to score");
    if (classes.empty()) throw EmptyInput("empty class list");
    std::map<Emotion, int> index;
    for (size_t i = 0; i < classes.size(); ++i)
        if (!index.emplace(classes[i], int(i)).second)
            throw SchemaViolation("duplicate class " + std::string(to_string(classes[i])));

    EvalReport rep;
    rep.classes = classes;
    rep.confusion = Eigen::MatrixXi::Zero(int(classes.size()), int(classes.size()));
    std::map<std::string, std::pair<long, long>> task_counts;
    for (const auto& p : predictions) {
        auto t = index.find(p.truth);
        auto q = index.find(p.predicted);
        if (t == index.end() || q == index.end())
            throw LabelOutsideClassSet("prediction labels " + std::string(to_string(p.truth)) +
                                       "/" + std::string(to_string(p.predicted)) +
                                       " not in the class list");
        rep.confusion(t->second, q->second) += 1;
        auto& tc = task_counts[p.task];
        tc.second += 1;
        if (p.truth == p.predicted) tc.first += 1;
    }
    rep.accuracy_overall = double(rep.confusion.trace()) / double(predictions.size());
    for (const auto& [task, c] : task_counts)
        rep.accuracy_by_task[task] = double(c.first) / double(c.second);
    for (size_t i = 0; i < classes.size(); ++i) {
        long row = rep.confusion.row(int(i)).sum();
        if (row > 0) rep.accuracy_by_emotion[classes[i]] = double(rep.confusion(int(i), int(i))) / double(row);
    }
    return rep;
}

EvalReport evaluate(const std::vector<Prediction>& predictions) {
    if (predictions.empty()) throw EmptyInput("no predictions to score");
    std::set<Emotion> seen;
    for (const auto& p : predictions) {
        seen.insert(p.truth);
        seen.insert(p.predicted);
    }
    std::vector<Emotion> classes;
    for (Emotion e : kAllEmotions)
        if (seen.count(e)) classes.push_back(e);
    return evaluate(predictions, classes);
}

// ---------------------------------------------------------------------------
// Fold execution
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<Prediction>> run_folds_impl(const Dataset& dataset, const SplitPlan& plan,
                                                    const TrainerFn& trainer, int threads) {
    for (const auto& fold : plan.folds)
        for (const auto& list : {fold.train, fold.test})
            for (size_t i : list)
                if (i >= dataset.instances.size())
                    throw SchemaViolation("fold index " + std::to_string(i) +
                                          " outside dataset of size " +
                                          std::to_string(dataset.instances.size()));

    std::vector<std::vector<Prediction>> per_fold(plan.folds.size());
    std::vector<std::exception_ptr> errors(plan.folds.size());
    auto run_one = [&](size_t f) {
        try {
            const Fold& fold = plan.folds[f];
            PredictFn predict = trainer(dataset, fold.train);
            per_fold[f].reserve(fold.test.size());
            for (size_t i : fold.test) {
                const TaskInstance& inst = dataset.instances[i];
                per_fold[f].push_back(
                    {*inst.label, predict(inst), to_string(inst.task), inst.subject_id});
            }
        } catch (...) {
            errors[f] = std::current_exception();
        }
    };

    int n_workers = std::max(1, std::min<int>(threads, int(plan.folds.size())));
    if (n_workers == 1) {
        for (size_t f = 0; f < plan.folds.size(); ++f) run_one(f);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(size_t(n_workers));
        for (int w = 0; w < n_workers; ++w)
            pool.emplace_back([&] {
                for (size_t f = next.fetch_add(1); f < plan.folds.size(); f = next.fetch_add(1))
                    run_one(f);
            });
        for (auto& th : pool) th.join();
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
    return per_fold;
}

}  // namespace

std::vector<Prediction> run_folds(const Dataset& dataset, const SplitPlan& plan,
                                  const TrainerFn& trainer, int threads) {
    auto per_fold = run_folds_impl(dataset, plan, trainer, threads);
    std::vector<Prediction> all;
    for (const auto& preds : per_fold) all.insert(all.end(), preds.begin(), preds.end());
    return all;
}

EvalReport run_protocol(const Dataset& dataset, const SplitPlan& plan, const TrainerFn& trainer,
                        int threads) {
    auto per_fold = run_folds_impl(dataset, plan, trainer, threads);
    std::vector<Prediction> all;
    std::vector<FoldScore> scores;
    for (size_t f = 0; f < per_fold.size(); ++f) {
        FoldScore fs;
        fs.name = plan.folds[f].name;
        fs.total = long(per_fold[f].size());
        for (const auto& p : per_fold[f])
            if (p.truth == p.predicted) ++fs.correct;
        scores.push_back(std::move(fs));
        all.insert(all.end(), per_fold[f].begin(), per_fold[f].end());
    }
    EvalReport rep = evaluate(all);
    rep.folds = std::move(scores);
    return rep;
}

// ---------------------------------------------------------------------------
// Class-subset sweep
// ---------------------------------------------------------------------------

std::vector<std::vector<Emotion>> default_subset_sequence() {
    return {
        {Emotion::Annoyance, Emotion::Neutral},
        {Emotion::Joy, Emotion::Annoyance, Emotion::Neutral},
        {Emotion::Joy, Emotion::Sadness, Emotion::Annoyance, Emotion::Neutral},
        {Emotion::Joy, Emotion::Pleasure, Emotion::Sadness, Emotion::Annoyance, Emotion::Neutral},
    };
}

std::map<int, double> class_subset_sweep(const Dataset& dataset, const TrainerFn& trainer,
                                         Protocol protocol, std::uint64_t seed,
                                         const std::vector<std::vector<Emotion>>& subsets,
                                         int threads) {
    if (subsets.empty()) throw EmptyInput("no class subsets given");
    std::map<int, double> out;
    for (const auto& subset : subsets) {
        if (subset.size() < 2)
            throw InsufficientData("class subset needs at least 2 labels, got " +
                                   std::to_string(subset.size()));
        std::set<Emotion> labels(subset.begin(), subset.end());
        if (labels.size() != subset.size()) throw SchemaViolation("duplicate label in class subset");
        if (!labels.count(Emotion::Neutral))
            throw SchemaViolation("class subsets must contain Neutral");
        if (out.count(int(subset.size())))
            throw SchemaViolation("two class subsets share size " + std::to_string(subset.size()));

        std::vector<TaskInstance> kept;
        for (const auto& inst : dataset.instances)
            if (inst.label && labels.count(*inst.label)) kept.push_back(inst);
        Dataset sub = Dataset::from_instances(std::move(kept));
        SplitPlan plan = make_splits(sub, protocol, seed);
        out[int(subset.size())] = run_protocol(sub, plan, trainer, threads).accuracy_overall;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string acc4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string render_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "overall," << acc4(r.accuracy_overall) << "\n";
    for (const auto& f : r.folds)
        os << "fold," << f.name << "," << f.correct << "," << f.total << ","
           << acc4(f.total > 0 ? double(f.correct) / double(f.total) : 0.0) << "\n";
    if (r.confusion.size() > 0) {
        os << "confusion,true\\predicted";
        for (Emotion e : r.classes) os << "," << to_string(e);
        os << "\n";
        for (int i = 0; i < r.confusion.rows(); ++i) {
            os << "confusion," << to_string(r.classes[size_t(i)]);
            for (int j = 0; j < r.confusion.cols(); ++j) os << "," << r.confusion(i, j);
            os << "\n";
        }
    }
    if (!r.accuracy_by_task.empty()) {
        double sum = 0;
        for (const auto& [task, acc] : r.accuracy_by_task) {
            os << "task," << task << "," << acc4(acc) << "\n";
            sum += acc;
        }
        os << "task_mean," << acc4(sum / double(r.accuracy_by_task.size())) << "\n";
    }
    for (const auto& [e, acc] : r.accuracy_by_emotion)
        os << "emotion," << to_string(e) << "," << acc4(acc) << "\n";
    for (const auto& [k, acc] : r.accuracy_by_class_count)
        os << "classcount," << k << "," << acc4(acc) << "\n";
    return os.str();
}

std::string render_markdown(const EvalReport& r) {
    std::ostringstream os;
    os << "# Evaluation report\n\n";
    os << "Overall accuracy: " << acc4(r.accuracy_overall) << "\n";
    if (!r.folds.empty()) {
        os << "\n## Folds\n\n| Fold | Correct | Total | Accuracy |\n|---|---|---|---|\n";
        for (const auto& f : r.folds)
            os << "| " << f.name << " | " << f.correct << " | " << f.total << " | "
               << acc4(f.total > 0 ? double(f.correct) / double(f.total) : 0.0) << " |\n";
    }
    if (r.confusion.size() > 0) {
        os << "\n## Confusion matrix\n\n| true \\ predicted |";
        for (Emotion e : r.classes) os << " " << to_string(e) << " |";
        os << "\n|---|";
        for (size_t i = 0; i < r.classes.size(); ++i) os << "---|";
        os << "\n";
        for (int i = 0; i < r.confusion.rows(); ++i) {
            os << "| " << to_string(r.classes[size_t(i)]) << " |";
            for (int j = 0; j < r.confusion.cols(); ++j) os << " " << r.confusion(i, j) << " |";
            os << "\n";
        }
    }
    if (!r.accuracy_by_task.empty()) {
        os << "\n## Accuracy by task\n\n| Task | Accuracy |\n|---|---|\n";
        double sum = 0;
        for (const auto& [task, acc] : r.accuracy_by_task) {
            os << "| " << task << " | " << acc4(acc) << " |\n";
            sum += acc;
        }
        os << "| Mean | " << acc4(sum / double(r.accuracy_by_task.size())) << " |\n";
    }
    if (!r.accuracy_by_emotion.empty()) {
        os << "\n## Accuracy by emotion\n\n| Emotion | Accuracy |\n|---|---|\n";
        for (const auto& [e, acc] : r.accuracy_by_emotion)
            os << "| " << to_string(e) << " | " << acc4(acc) << " |\n";
    }
    if (!r.accuracy_by_class_count.empty()) {
        os << "\n## Accuracy by number of classes\n\n| Classes | Accuracy |\n|---|---|\n";
        for (const auto& [k, acc] : r.accuracy_by_class_count)
            os << "| " << k << " | " << acc4(acc) << " |\n";
    }
    return os.str();
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
    return format == ReportFormat::Csv ? render_csv(report) : render_markdown(report);
}

void emit_report(const EvalReport& report, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    out << render_report(report, format);
    out.flush();
    if (!out) throw IoFailure("write failed for " + path);
}

}  // namespace emokin
