#include "emokin/cnn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <thread>
#include <zlib.h>

#include "emokin/errors.hpp"

namespace emokin {

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

CnnArchitecture CnnArchitecture::standard(int classes) {
    CnnArchitecture a;
    a.blocks = {{32, true}, {64, true}, {128, true}};
    a.dense_hidden = {20, 64, 32};
    a.classes = classes;
    a.validate();
    return a;
}

CnnArchitecture CnnArchitecture::reduced(int classes) {
    CnnArchitecture a;
    a.in_h = a.in_w = 12;
    a.blocks = {{4, true}, {8, false}, {8, false}};
    a.dropout_after_block = 0;
    a.dropout_rate = 0.0;
    a.dense_hidden = {8};
    a.classes = classes;
    a.validate();
    return a;
}

std::vector<CnnArchitecture::ConvShape> CnnArchitecture::conv_shapes() const {
    if (in_h < 3 || in_w < 3 || in_c < 1) throw ShapeMismatch("input too small");
    if (blocks.empty()) throw ShapeMismatch("no convolutional blocks");
    std::vector<ConvShape> shapes;
    int h = in_h, w = in_w, c = in_c;
    for (size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        if (b.out_channels < 1) throw ShapeMismatch("block " + std::to_string(i + 1) + " has no channels");
        ConvShape s;
        s.in_h = h;
        s.in_w = w;
        s.in_c = c;
        s.out_h = h - 2;
        s.out_w = w - 2;
        s.out_c = b.out_channels;
        if (s.out_h < 1 || s.out_w < 1)
            throw ShapeMismatch("feature map vanishes at block " + std::to_string(i + 1));
        s.pool_after = b.pool_after;
        if (b.pool_after) {
            if (s.out_h % 2 != 0 || s.out_w % 2 != 0)
                throw ShapeMismatch("2x2 pooling needs even dimensions at block " + std::to_string(i + 1));
            s.pooled_h = s.out_h / 2;
            s.pooled_w = s.out_w / 2;
        } else {
            s.pooled_h = s.out_h;
            s.pooled_w = s.out_w;
        }
        h = s.pooled_h;
        w = s.pooled_w;
        c = s.out_c;
        shapes.push_back(s);
    }
    return shapes;
}

int CnnArchitecture::flatten_size() const {
    auto shapes = conv_shapes();
    const auto& last = shapes.back();
    return last.pooled_h * last.pooled_w * last.out_c;
}

void CnnArchitecture::validate() const {
    auto shapes = conv_shapes();
    (void)shapes;
    if (classes < 2) throw ShapeMismatch("need at least 2 classes");
    for (int w : dense_hidden)
        if (w < 1) throw ShapeMismatch("dense width must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ShapeMismatch("dropout rate outside [0, 1)");
    if (dropout_after_block < 0 || dropout_after_block > static_cast<int>(blocks.size()))
        throw ShapeMismatch("dropout block index out of range");
}

std::int64_t param_count(const CnnArchitecture& arch) {
    std::int64_t total = 0;
    for (const auto& s : arch.conv_shapes())
        total += std::int64_t(s.in_c * 9 + 1) * s.out_c;
    std::int64_t in = arch.flatten_size();
    std::vector<int> widths = arch.dense_hidden;
    widths.push_back(arch.classes);
    for (int w : widths) {
        total += (in + 1) * w;
        in = w;
    }
    return total;
}

std::int64_t flop_estimate(const CnnArchitecture& arch) {
    std::int64_t total = 0;
    for (const auto& s : arch.conv_shapes())
        total += 2LL * s.out_h * s.out_w * s.out_c * s.in_c * 9;
    std::int64_t in = arch.flatten_size();
    std::vector<int> widths = arch.dense_hidden;
    widths.push_back(arch.classes);
    for (int w : widths) {
        total += 2LL * in * w;
        in = w;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Network buffers
// ---------------------------------------------------------------------------

template <typename S>
Network<S>::Network(const CnnArchitecture& a) : arch(a) {
    auto shapes = a.conv_shapes();
    for (const auto& s : shapes) {
        conv_w.push_back(Mat::Zero(s.in_c * 9, s.out_c));
        conv_b.push_back(Vec::Zero(s.out_c));
    }
    int in = a.flatten_size();
    std::vector<int> widths = a.dense_hidden;
    widths.push_back(a.classes);
    for (int w : widths) {
        dense_w.push_back(Mat::Zero(w, in));
        dense_b.push_back(Vec::Zero(w));
        in = w;
    }
}

template <typename S>
void Network<S>::set_zero() {
    for (auto& m : conv_w) m.setZero();
    for (auto& v : conv_b) v.setZero();
    for (auto& m : dense_w) m.setZero();
    for (auto& v : dense_b) v.setZero();
}

template <typename S>
void Network<S>::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](Mat& m, double fan_in) {
        double limit = std::sqrt(6.0 / fan_in);
        S* p = m.data();
        for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = static_cast<S>(rng.uniform(-limit, limit));
    };
    for (auto& w : conv_w) fill(w, double(w.rows()));
    for (auto& w : dense_w) fill(w, double(w.cols()));
    for (auto& b : conv_b) b.setZero();
    for (auto& b : dense_b) b.setZero();
}

template <typename S>
std::vector<std::pair<S*, std::ptrdiff_t>> Network<S>::param_blocks() {
    std::vector<std::pair<S*, std::ptrdiff_t>> out;
    for (size_t i = 0; i < conv_w.size(); ++i) {
        out.push_back({conv_w[i].data(), conv_w[i].size()});
        out.push_back({conv_b[i].data(), conv_b[i].size()});
    }
    for (size_t i = 0; i < dense_w.size(); ++i) {
        out.push_back({dense_w[i].data(), dense_w[i].size()});
        out.push_back({dense_b[i].data(), dense_b[i].size()});
    }
    return out;
}

template <typename S>
std::vector<std::pair<const S*, std::ptrdiff_t>> Network<S>::param_blocks() const {
    std::vector<std::pair<const S*, std::ptrdiff_t>> out;
    for (auto& [p, n] : const_cast<Network<S>*>(this)->param_blocks()) out.push_back({p, n});
    return out;
}

template <typename S>
std::int64_t Network<S>::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& [p, c] : param_blocks()) n += c;
    return n;
}

// ---------------------------------------------------------------------------
// Forward / backward machinery
// ---------------------------------------------------------------------------

namespace {

// Planes are (H*W) x C column-major, so each channel is contiguous and the
// flattened buffer is already in CHW order.
template <typename S>
void im2col(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& plane, int H, int W,
            Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& col) {
    const int C = static_cast<int>(plane.cols());
    const int Ho = H - 2, Wo = W - 2;
    col.resize(std::ptrdiff_t(Ho) * Wo, std::ptrdiff_t(C) * 9);
    for (int c = 0; c < C; ++c) {
        const S* src = plane.data() + std::ptrdiff_t(c) * H * W;
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                S* dst = col.data() + (std::ptrdiff_t(c) * 9 + ky * 3 + kx) * Ho * Wo;
                for (int y = 0; y < Ho; ++y)
                    std::memcpy(dst + std::ptrdiff_t(y) * Wo, src + std::ptrdiff_t(y + ky) * W + kx,
                                sizeof(S) * Wo);
            }
    }
}

template <typename S>
void col2im_add(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& dcol, int H, int W, int C,
                Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& dplane) {
    const int Ho = H - 2, Wo = W - 2;
    dplane.setZero(std::ptrdiff_t(H) * W, C);
    for (int c = 0; c < C; ++c) {
        S* dst = dplane.data() + std::ptrdiff_t(c) * H * W;
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const S* src = dcol.data() + (std::ptrdiff_t(c) * 9 + ky * 3 + kx) * Ho * Wo;
                for (int y = 0; y < Ho; ++y) {
                    S* drow = dst + std::ptrdiff_t(y + ky) * W + kx;
                    const S* srow = src + std::ptrdiff_t(y) * Wo;
                    for (int x = 0; x < Wo; ++x) drow[x] += srow[x];
                }
            }
    }
}

template <typename S>
void maxpool(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& in, int H, int W,
             Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& out, Eigen::MatrixXi& arg) {
    const int C = static_cast<int>(in.cols());
    const int Ho = H / 2, Wo = W / 2;
    out.resize(std::ptrdiff_t(Ho) * Wo, C);
    arg.resize(std::ptrdiff_t(Ho) * Wo, C);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y)
            for (int x = 0; x < Wo; ++x) {
                int base = 2 * y * W + 2 * x;
                int best = base;
                S bv = in(base, c);
                for (int d : {1, W, W + 1}) {
                    if (in(base + d, c) > bv) {  // first max wins ties
                        bv = in(base + d, c);
                        best = base + d;
                    }
                }
                out(y * Wo + x, c) = bv;
                arg(y * Wo + x, c) = best;
            }
}

template <typename S>
struct FwdCache {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    std::vector<Mat> cols;      // im2col of each block input
    std::vector<Mat> conv_out;  // post-ReLU, pre-pool
    std::vector<Mat> block_out; // after pooling (and dropout where configured)
    std::vector<Eigen::MatrixXi> argmax;
    Mat dropout_mask;  // empty when unused
    std::vector<Vec> dense_in;  // input to each dense layer
    Vec logits;
};

template <typename S>
void forward_impl(const Network<S>& net, const typename Network<S>::Vec& image, FwdCache<S>& c,
                  Rng* dropout_rng) {
    using Mat = typename Network<S>::Mat;
    const auto shapes = net.arch.conv_shapes();
    const size_t nb = shapes.size();
    c.cols.resize(nb);
    c.conv_out.resize(nb);
    c.block_out.resize(nb);
    c.argmax.resize(nb);
    c.dropout_mask.resize(0, 0);

    if (image.size() != std::ptrdiff_t(net.arch.in_h) * net.arch.in_w * net.arch.in_c)
        throw ShapeMismatch("input has " + std::to_string(image.size()) + " values");

    Mat plane = Eigen::Map<const Mat>(image.data(), std::ptrdiff_t(net.arch.in_h) * net.arch.in_w,
                                      net.arch.in_c);
    for (size_t li = 0; li < nb; ++li) {
        const auto& s = shapes[li];
        im2col(plane, s.in_h, s.in_w, c.cols[li]);
        Mat& out = c.conv_out[li];
        out.noalias() = c.cols[li] * net.conv_w[li];
        out.rowwise() += net.conv_b[li].transpose();
        out = out.cwiseMax(S(0));
        if (s.pool_after)
            maxpool(out, s.out_h, s.out_w, c.block_out[li], c.argmax[li]);
        else
            c.block_out[li] = out;
        if (static_cast<int>(li) + 1 == net.arch.dropout_after_block && dropout_rng &&
            net.arch.dropout_rate > 0.0) {
            const double keep = 1.0 - net.arch.dropout_rate;
            Mat& mask = c.dropout_mask;
            mask.resize(c.block_out[li].rows(), c.block_out[li].cols());
            S* p = mask.data();
            for (Eigen::Index i = 0; i < mask.size(); ++i)
                p[i] = dropout_rng->uniform() < keep ? S(1.0 / keep) : S(0);
            c.block_out[li] = c.block_out[li].cwiseProduct(mask);
        }
        plane = c.block_out[li];
    }

    const size_t nd = net.dense_w.size();
    c.dense_in.resize(nd);
    c.dense_in[0] = Eigen::Map<const typename Network<S>::Vec>(plane.data(), plane.size());
    for (size_t li = 0; li + 1 < nd; ++li) {
        c.dense_in[li + 1].noalias() = net.dense_w[li] * c.dense_in[li];
        c.dense_in[li + 1] += net.dense_b[li];
        c.dense_in[li + 1] = c.dense_in[li + 1].cwiseMax(S(0));
    }
    c.logits.noalias() = net.dense_w[nd - 1] * c.dense_in[nd - 1];
    c.logits += net.dense_b[nd - 1];
}

}  // namespace

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> softmax(const Eigen::Matrix<S, Eigen::Dynamic, 1>& z) {
    Eigen::Matrix<S, Eigen::Dynamic, 1> e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

template <typename S>
typename Network<S>::Vec Network<S>::logits(const Vec& image_chw) const {
    FwdCache<S> c;
    forward_impl(*this, image_chw, c, nullptr);
    return c.logits;
}

template <typename S>
S Network<S>::sample_loss_grad(const Vec& image, int label, Network& grad, Rng* dropout_rng) const {
    if (label < 0 || label >= arch.classes) throw LabelOutsideClassSet(std::to_string(label));
    FwdCache<S> c;
    forward_impl(*this, image, c, dropout_rng);

    // softmax cross-entropy via logsumexp
    const S zmax = c.logits.maxCoeff();
    const S lse = zmax + std::log((c.logits.array() - zmax).exp().sum());
    const S loss = lse - c.logits[label];

    Vec dz = softmax<S>(c.logits);
    dz[label] -= S(1);

    const size_t nd = dense_w.size();
    for (size_t li = nd; li-- > 0;) {
        grad.dense_w[li].noalias() += dz * c.dense_in[li].transpose();
        grad.dense_b[li] += dz;
        Vec dx = dense_w[li].transpose() * dz;
        if (li == 0) {
            dz = std::move(dx);
            break;
        }
        dz = dx.cwiseProduct((c.dense_in[li].array() > S(0)).template cast<S>().matrix());
    }

    const auto shapes = arch.conv_shapes();
    Mat dplane =
        Eigen::Map<const Mat>(dz.data(), c.block_out.back().rows(), c.block_out.back().cols());
    for (size_t li = shapes.size(); li-- > 0;) {
        const auto& s = shapes[li];
        if (static_cast<int>(li) + 1 == arch.dropout_after_block && c.dropout_mask.size() > 0)
            dplane = dplane.cwiseProduct(c.dropout_mask);
        Mat dconv;
        if (s.pool_after) {
            dconv.setZero(std::ptrdiff_t(s.out_h) * s.out_w, s.out_c);
            const auto& arg = c.argmax[li];
            for (Eigen::Index ch = 0; ch < dplane.cols(); ++ch)
                for (Eigen::Index r = 0; r < dplane.rows(); ++r)
                    dconv(arg(r, ch), ch) += dplane(r, ch);
        } else {
            dconv = dplane;
        }
        dconv = dconv.cwiseProduct((c.conv_out[li].array() > S(0)).template cast<S>().matrix());
        grad.conv_w[li].noalias() += c.cols[li].transpose() * dconv;
        grad.conv_b[li] += dconv.colwise().sum().transpose();
        if (li > 0) {
            Mat dcol;
            dcol.noalias() = dconv * conv_w[li].transpose();
            col2im_add(dcol, s.in_h, s.in_w, s.in_c, dplane);
        }
    }
    return loss;
}

template <typename S>
S Network<S>::batch_loss_grad(const std::vector<Vec>& images, const std::vector<int>& labels,
                              Network& grad, std::uint64_t dropout_seed, bool dropout_enabled,
                              int threads) const {
    if (images.empty()) throw EmptyDataset("empty batch");
    if (images.size() != labels.size()) throw ShapeMismatch("image/label count mismatch");
    const size_t n = images.size();
    grad.set_zero();
    S total = S(0);

    auto run_range = [&](size_t lo, size_t hi, Network& g, S& loss_out) {
        for (size_t i = lo; i < hi; ++i) {
            Rng rng(mix_seed(dropout_seed, {static_cast<std::uint64_t>(i)}));
            loss_out += sample_loss_grad(images[i], labels[i], g, dropout_enabled ? &rng : nullptr);
        }
    };

    if (threads <= 1 || n <= 1) {
        run_range(0, n, grad, total);
    } else {
        const size_t t = std::min<size_t>(threads, n);
        std::vector<Network> partial(t, Network(arch));
        std::vector<S> losses(t, S(0));
        std::vector<std::thread> pool;
        const size_t chunk = (n + t - 1) / t;
        for (size_t k = 0; k < t; ++k)
            pool.emplace_back([&, k] {
                run_range(k * chunk, std::min(n, (k + 1) * chunk), partial[k], losses[k]);
            });
        for (auto& th : pool) th.join();
        // fixed-order reduction keeps results identical for a given thread count
        for (size_t k = 0; k < t; ++k) {
            total += losses[k];
            auto dst = grad.param_blocks();
            auto src = partial[k].param_blocks();
            for (size_t b = 0; b < dst.size(); ++b)
                Eigen::Map<Vec>(dst[b].first, dst[b].second) +=
                    Eigen::Map<const Vec>(src[b].first, src[b].second);
        }
    }

    const S inv = S(1) / S(double(n));
    for (auto& [p, cnt] : grad.param_blocks()) Eigen::Map<Vec>(p, cnt) *= inv;
    return total * inv;
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> image_to_input(const PolarImage& img) {
    constexpr int HW = PolarImage::kSize * PolarImage::kSize;
    Eigen::Matrix<S, Eigen::Dynamic, 1> v(3 * HW);
    for (int c = 0; c < 3; ++c)
        for (int p = 0; p < HW; ++p) v[c * HW + p] = S(img.pixels[3 * p + c]) / S(255);
    return v;
}

// ---------------------------------------------------------------------------
// Model-level API
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw SchemaViolation("learning rate must be positive");
    if (batch_size < 1) throw SchemaViolation("batch size must be at least 1");
    if (epochs < 0) throw SchemaViolation("epoch count must be non-negative");
    if (threads < 1) throw SchemaViolation("thread count must be at least 1");
}

Eigen::VectorXf forward(const CnnModel& model, const PolarImage& image, ForwardMode mode, Rng* rng) {
    auto input = image_to_input<float>(image);
    if (mode == ForwardMode::Eval || rng == nullptr) return model.net.logits(input);
    FwdCache<float> c;
    forward_impl(model.net, input, c, rng);
    return c.logits;
}

std::pair<float, Network<float>> loss_and_gradients(const CnnModel& model,
                                                    const std::vector<PolarImage>& images,
                                                    const std::vector<int>& labels) {
    std::vector<Eigen::VectorXf> inputs;
    inputs.reserve(images.size());
    for (const auto& im : images) inputs.push_back(image_to_input<float>(im));
    Network<float> grad(model.arch);
    // dropout off: this entry point evaluates the deterministic graph
    float loss = model.net.batch_loss_grad(inputs, labels, grad, 0, false, 1);
    return {loss, std::move(grad)};
}

CnnModel train_cnn(const std::vector<PolarImage>& images, const std::vector<int>& labels,
                   const std::vector<Emotion>& class_labels, const CnnArchitecture& arch,
                   const TrainConfig& cfg, TrainLog* log, std::ostream* progress) {
    cfg.validate();
    arch.validate();
    if (images.empty()) throw EmptyDataset("no training samples");
    if (images.size() != labels.size()) throw ShapeMismatch("image/label count mismatch");
    if (static_cast<int>(class_labels.size()) != arch.classes)
        throw ShapeMismatch("class label list does not match architecture");
    for (int l : labels)
        if (l < 0 || l >= arch.classes)
            throw LabelOutsideClassSet("label index " + std::to_string(l));

    CnnModel model;
    model.arch = arch;
    model.class_labels = class_labels;
    model.net = Network<float>(arch);
    model.net.init_weights(mix_seed(cfg.seed, {0x1111}));

    std::vector<Eigen::VectorXf> inputs;
    inputs.reserve(images.size());
    for (const auto& im : images) inputs.push_back(image_to_input<float>(im));

    Network<float> grad(arch), m(arch), v(arch);
    Rng shuffle_rng(mix_seed(cfg.seed, {0x2222}));
    std::vector<size_t> order(images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    const auto b1 = float(cfg.beta1), b2 = float(cfg.beta2);
    const auto lr = float(cfg.learning_rate), eps = float(cfg.epsilon);
    long step = 0;
    if (log) log->epoch_loss.clear();

    std::vector<Eigen::VectorXf> batch_in;
    std::vector<int> batch_lab;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_sum = 0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            batch_in.clear();
            batch_lab.clear();
            for (size_t i = start; i < end; ++i) {
                batch_in.push_back(inputs[order[i]]);
                batch_lab.push_back(labels[order[i]]);
            }
            const std::uint64_t dropout_seed = mix_seed(
                cfg.seed, {0x3333, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batches)});
            float loss = model.net.batch_loss_grad(batch_in, batch_lab, grad, dropout_seed,
                                                   cfg.dropout_enabled_in_training, cfg.threads);
            ++step;
            const float c1 = 1.0f - std::pow(b1, float(step));
            const float c2 = 1.0f - std::pow(b2, float(step));
            auto wb = model.net.param_blocks();
            auto gb = grad.param_blocks();
            auto mb = m.param_blocks();
            auto vb = v.param_blocks();
            for (size_t b = 0; b < wb.size(); ++b) {
                Eigen::Map<Eigen::VectorXf> w(wb[b].first, wb[b].second);
                Eigen::Map<Eigen::VectorXf> g(gb[b].first, gb[b].second);
                Eigen::Map<Eigen::VectorXf> mm(mb[b].first, mb[b].second);
                Eigen::Map<Eigen::VectorXf> vv(vb[b].first, vb[b].second);
                mm = b1 * mm + (1.0f - b1) * g;
                vv = b2 * vv + (1.0f - b2) * g.cwiseProduct(g);
                Eigen::VectorXf denom = (vv / c2).cwiseSqrt();
                denom.array() += eps;
                w -= lr * (mm / c1).cwiseQuotient(denom);
            }
            epoch_sum += loss;
            ++batches;
        }
        const double mean_loss = batches ? epoch_sum / double(batches) : 0.0;
        if (log) log->epoch_loss.push_back(mean_loss);
        if (progress) (*progress) << "epoch " << (epoch + 1) << "/" << cfg.epochs << " loss "
                                  << mean_loss << "\n";
    }
    return model;
}

CnnPrediction predict(const CnnModel& model, const PolarImage& image) {
    Eigen::VectorXf z = forward(model, image, ForwardMode::Eval);
    Eigen::VectorXd probs = softmax<double>(z.cast<double>());
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return {model.class_labels[static_cast<size_t>(best)], probs};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
    char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char((v >> 24) & 0xFF)};
    buf.append(b, 4);
}

void put_f64(std::string& buf, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    buf.append(b, 8);
}

struct Cursor {
    const std::uint8_t* p;
    size_t left;
    void need(size_t n) const {
        if (left < n) throw SchemaViolation("model file ends unexpectedly");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                          std::uint32_t(p[3]) << 24;
        p += 4;
        left -= 4;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, p, 8);
        p += 8;
        left -= 8;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        std::uint8_t v = *p++;
        --left;
        return v;
    }
    void floats(float* dst, size_t n) {
        need(4 * n);
        std::memcpy(dst, p, 4 * n);
        p += 4 * n;
        left -= 4 * n;
    }
};

constexpr char kMagic[4] = {'E', 'K', 'C', 'N'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_model(const CnnModel& model, const std::filesystem::path& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    const auto& a = model.arch;
    put_u32(buf, std::uint32_t(a.in_h));
    put_u32(buf, std::uint32_t(a.in_w));
    put_u32(buf, std::uint32_t(a.in_c));
    put_u32(buf, std::uint32_t(a.blocks.size()));
    for (const auto& b : a.blocks) {
        put_u32(buf, std::uint32_t(b.out_channels));
        buf.push_back(b.pool_after ? 1 : 0);
    }
    put_u32(buf, std::uint32_t(a.dropout_after_block));
    put_f64(buf, a.dropout_rate);
    put_u32(buf, std::uint32_t(a.dense_hidden.size()));
    for (int w : a.dense_hidden) put_u32(buf, std::uint32_t(w));
    put_u32(buf, std::uint32_t(a.classes));
    put_u32(buf, std::uint32_t(model.class_labels.size()));
    for (Emotion e : model.class_labels) buf.push_back(char(static_cast<std::uint8_t>(e)));
    for (const auto& [p, n] : model.net.param_blocks())
        buf.append(reinterpret_cast<const char*>(p), size_t(n) * 4);

    const auto crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) throw IoFailure("write failed for " + path.string());
}

CnnModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoFailure("read failed for " + path.string());

    if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw VersionMismatch(path.string() + ": not a model file");
    const auto crc_stored = std::uint32_t(std::uint8_t(buf[buf.size() - 4])) |
                            std::uint32_t(std::uint8_t(buf[buf.size() - 3])) << 8 |
                            std::uint32_t(std::uint8_t(buf[buf.size() - 2])) << 16 |
                            std::uint32_t(std::uint8_t(buf[buf.size() - 1])) << 24;
    const auto crc_actual = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc_stored != crc_actual) throw ChecksumMismatch(path.string());

    Cursor cur{reinterpret_cast<const std::uint8_t*>(buf.data()) + 4, buf.size() - 8};
    if (cur.u32() != kVersion) throw VersionMismatch(path.string() + ": unsupported version");

    CnnArchitecture a;
    a.in_h = int(cur.u32());
    a.in_w = int(cur.u32());
    a.in_c = int(cur.u32());
    const auto nb = cur.u32();
    a.blocks.clear();
    for (std::uint32_t i = 0; i < nb; ++i) {
        CnnArchitecture::Block b;
        b.out_channels = int(cur.u32());
        b.pool_after = cur.u8() != 0;
        a.blocks.push_back(b);
    }
    a.dropout_after_block = int(cur.u32());
    a.dropout_rate = cur.f64();
    const auto nh = cur.u32();
    a.dense_hidden.clear();
    for (std::uint32_t i = 0; i < nh; ++i) a.dense_hidden.push_back(int(cur.u32()));
    a.classes = int(cur.u32());
    a.validate();

    CnnModel model;
    model.arch = a;
    const auto nl = cur.u32();
    for (std::uint32_t i = 0; i < nl; ++i) {
        auto raw = cur.u8();
        if (raw >= kAllEmotions.size()) throw SchemaViolation("bad class label in model file");
        model.class_labels.push_back(static_cast<Emotion>(raw));
    }
    model.net = Network<float>(a);
    for (auto& [p, n] : model.net.param_blocks()) cur.floats(p, size_t(n));
    if (cur.left != 0) throw SchemaViolation(path.string() + ": trailing bytes in model file");
    return model;
}

template struct Network<float>;
template struct Network<double>;
template Eigen::Matrix<float, Eigen::Dynamic, 1> softmax<float>(
    const Eigen::Matrix<float, Eigen::Dynamic, 1>&);
template Eigen::Matrix<double, Eigen::Dynamic, 1> softmax<double>(
    const Eigen::Matrix<double, Eigen::Dynamic, 1>&);
template Eigen::Matrix<float, Eigen::Dynamic, 1> image_to_input<float>(const PolarImage&);
template Eigen::Matrix<double, Eigen::Dynamic, 1> image_to_input<double>(const PolarImage&);

}  // namespace emokin
