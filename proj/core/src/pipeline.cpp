#include "emokin/pipeline.hpp"

#include <memory>
#include <set>

#include "emokin/errors.hpp"

namespace emokin {

FrameSeq dtw_input(const TaskInstance& instance, double rate, int stride) {
    FrameSeq full = frame_stack(bundle_from_instance(instance, rate));
    if (stride <= 1) return full;
    const long kept = (full.rows() + stride - 1) / stride;
    FrameSeq out(kept, full.cols());
    for (long r = 0; r < kept; ++r) out.row(r) = full.row(r * stride);
    return out;
}

PolarImage cnn_input(const TaskInstance& instance, double rate) {
    return rasterize_instance(instance, {}, rate);
}

TrainerFn make_dtw_trainer(DtwPipelineConfig cfg) {
    return [cfg](const Dataset& ds, const std::vector<size_t>& train) -> PredictFn {
        std::vector<std::pair<FrameSeq, Emotion>> seqs;
        seqs.reserve(train.size());
        for (size_t i : train) {
            const TaskInstance& inst = ds.instances[i];
            if (!inst.label) throw InsufficientData("unlabeled training instance");
            seqs.emplace_back(dtw_input(inst, cfg.rate, cfg.stride), *inst.label);
        }
        auto model = std::make_shared<DtwModel>(
            select_templates(seqs, cfg.k_per_class, cfg.band));
        return [model, cfg](const TaskInstance& inst) {
            return classify(*model, dtw_input(inst, cfg.rate, cfg.stride)).label;
        };
    };
}

TrainerFn make_cnn_trainer(CnnArchitecture arch, TrainConfig cfg, std::ostream* progress) {
    // one rasterization per instance even when the harness reuses the trainer
    // across folds; keyed by address since folds share one dataset
    auto cache = std::make_shared<std::map<const TaskInstance*, PolarImage>>();
    auto image_of = [cache](const TaskInstance& inst) -> const PolarImage& {
        auto it = cache->find(&inst);
        if (it == cache->end()) it = cache->emplace(&inst, cnn_input(inst)).first;
        return it->second;
    };
    return [arch, cfg, progress, image_of](const Dataset& ds,
                                           const std::vector<size_t>& train) -> PredictFn {
        std::set<Emotion> seen;
        for (size_t i : train) {
            if (!ds.instances[i].label) throw InsufficientData("unlabeled training instance");
            seen.insert(*ds.instances[i].label);
        }
        std::vector<Emotion> classes;
        for (Emotion e : kAllEmotions)
            if (seen.count(e)) classes.push_back(e);

        std::vector<PolarImage> images;
        std::vector<int> labels;
        images.reserve(train.size());
        labels.reserve(train.size());
        for (size_t i : train) {
            images.push_back(image_of(ds.instances[i]));
            labels.push_back(int(std::find(classes.begin(), classes.end(),
                                           *ds.instances[i].label) -
                                 classes.begin()));
        }
        CnnArchitecture fold_arch = arch;
        fold_arch.classes = int(classes.size());
        auto model = std::make_shared<CnnModel>(
            train_cnn(images, labels, classes, fold_arch, cfg, nullptr, progress));
        return [model, image_of](const TaskInstance& inst) {
            return predict(*model, image_of(inst)).label;
        };
    };
}

}  // namespace emokin
