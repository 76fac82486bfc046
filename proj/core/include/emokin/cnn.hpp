#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "emokin/polar.hpp"
#include "emokin/rng.hpp"
#include "emokin/telemetry.hpp"

namespace emokin {

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

/// Conv stack description. Every block is a 3x3 valid-padding convolution with
/// ReLU; pool_after adds 2x2 stride-2 max pooling. The standard net pools
/// after every block; the reduced gradient-check net only after the first,
/// because its feature maps are too small to halve three times.
struct CnnArchitecture {
    struct Block {
        int out_channels = 0;
        bool pool_after = true;
        bool operator==(const Block&) const = default;
    };

    int in_h = 150, in_w = 150, in_c = 3;
    std::vector<Block> blocks;
    int dropout_after_block = 2;  // 1-based block index, 0 disables
    double dropout_rate = 0.2;
    std::vector<int> dense_hidden;  // widths between flatten and the class layer
    int classes = 5;

    /// 150x150x3, conv 32/64/128 all pooled, dropout 0.2 after block 2,
    /// dense 36992 -> 20 -> 64 -> 32 -> C.
    static CnnArchitecture standard(int classes = 5);
    /// 12x12x3, conv 4/8/8 (pool only after block 1), dense 8 -> 8 -> C.
    static CnnArchitecture reduced(int classes = 5);

    struct ConvShape {
        int in_h, in_w, in_c;    // input planes
        int out_h, out_w, out_c; // after the convolution
        bool pool_after;
        int pooled_h, pooled_w;  // after optional pooling
    };
    /// Validates the whole shape chain; throws ShapeMismatch.
    std::vector<ConvShape> conv_shapes() const;
    int flatten_size() const;
    void validate() const;
    bool operator==(const CnnArchitecture&) const = default;
};

std::int64_t param_count(const CnnArchitecture& arch);

/// Multiply-accumulate based FLOP estimate for one forward pass (2 FLOPs per
/// MAC); reported by the describe command, not asserted anywhere.
std::int64_t flop_estimate(const CnnArchitecture& arch);

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Plain-buffer network, templated on the scalar so training runs in float
/// while the finite-difference gradient check runs in double.
template <typename S>
struct Network {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    CnnArchitecture arch;
    std::vector<Mat> conv_w;  // per block: (in_c*9) x out_c
    std::vector<Vec> conv_b;
    std::vector<Mat> dense_w;  // out x in
    std::vector<Vec> dense_b;

    Network() = default;
    explicit Network(const CnnArchitecture& a);  // zero weights

    void init_weights(std::uint64_t seed);  // centered uniform, fan-in scaled
    void set_zero();

    /// All parameter tensors as flat (pointer, count) blocks, fixed order.
    std::vector<std::pair<S*, std::ptrdiff_t>> param_blocks();
    std::vector<std::pair<const S*, std::ptrdiff_t>> param_blocks() const;
    std::int64_t parameter_count() const;

    /// Eval-mode forward (no dropout).
    Vec logits(const Vec& image_chw) const;

    /// Forward + backward for one sample; adds this sample's gradients into
    /// grad (same shapes) and returns the cross-entropy loss. dropout_rng nil
    /// disables dropout (eval-style forward).
    S sample_loss_grad(const Vec& image_chw, int label, Network& grad, Rng* dropout_rng) const;

    /// Mean loss over a batch, gradients of the mean loss into grad. Dropout
    /// masks are drawn per sample from seeds mixed with sample order, so the
    /// result is independent of threading. threads <= 1 runs serially.
    S batch_loss_grad(const std::vector<Vec>& images, const std::vector<int>& labels,
                      Network& grad, std::uint64_t dropout_seed, bool dropout_enabled,
                      int threads = 1) const;

    bool operator==(const Network&) const = default;
};

/// Numerically stable softmax.
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> softmax(const Eigen::Matrix<S, Eigen::Dynamic, 1>& z);

/// Flatten pixels to a CHW vector scaled to [0,1].
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> image_to_input(const PolarImage& img);

// ---------------------------------------------------------------------------
// Model + training
// ---------------------------------------------------------------------------

struct CnnModel {
    CnnArchitecture arch;
    Network<float> net;
    std::vector<Emotion> class_labels;

    bool operator==(const CnnModel&) const = default;
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 8;
    double learning_rate = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    std::uint64_t seed = 1;
    bool dropout_enabled_in_training = true;
    int threads = 1;

    void validate() const;
};

enum class ForwardMode { Train, Eval };

/// Spec'd forward entry point; Train mode draws a dropout mask from rng.
Eigen::VectorXf forward(const CnnModel& model, const PolarImage& image, ForwardMode mode,
                        Rng* rng = nullptr);

/// Mean loss and gradients over a batch (float path).
std::pair<float, Network<float>> loss_and_gradients(const CnnModel& model,
                                                    const std::vector<PolarImage>& images,
                                                    const std::vector<int>& labels);

struct TrainLog {
    std::vector<double> epoch_loss;  // one mean loss per epoch
};

/// Adam training loop. labels index into class_labels; every label must be in
/// range. progress (optional) receives one line per epoch.
CnnModel train_cnn(const std::vector<PolarImage>& images, const std::vector<int>& labels,
                   const std::vector<Emotion>& class_labels, const CnnArchitecture& arch,
                   const TrainConfig& cfg, TrainLog* log = nullptr,
                   std::ostream* progress = nullptr);

struct CnnPrediction {
    Emotion label;
    Eigen::VectorXd probabilities;
};

CnnPrediction predict(const CnnModel& model, const PolarImage& image);

///// Binary container: magic "EKCN", version, architecture, class labels,
/// float32 little-endian weights, trailing CRC32. Bit-exact round-trip.
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

extern template struct Network<float>;
extern template struct Network<double>;

}  // namespace emokin
