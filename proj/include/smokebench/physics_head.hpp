#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smokebench/scattering.hpp"
#include "smokebench/smoke_synth.hpp"

namespace smokebench {

/// CHW double tensor used by the trainable path.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, fill) {}

    double& at(int ch, int y, int x) { return v[(std::size_t(ch) * h + y) * w + x]; }
    double at(int ch, int y, int x) const { return v[(std::size_t(ch) * h + y) * w + x]; }
    std::size_t size() const { return v.size(); }
};

inline Tensor to_tensor(const Image& img) {
    Tensor t(3, img.height, img.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) t.at(c, y, x) = img.at(y, x, c);
    return t;
}

inline Tensor to_tensor(const ScalarField& f) {
    Tensor t(1, f.height, f.width);
    for (std::size_t i = 0; i < f.size(); ++i) t.v[i] = f.data[i];
    return t;
}

namespace nn {

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// 3x3 convolution, stride 1, replicate padding. Weights are laid out
/// [oc][ic][ky][kx] followed by oc biases.
inline void conv3x3_forward(const Tensor& in, std::span<const double> w,
                            std::span<const double> bias, Tensor& out) {
    const int h = in.h, wd = in.w, ic_n = in.c, oc_n = out.c;
    for (int oc = 0; oc < oc_n; ++oc) {
        for (std::size_t i = 0; i < std::size_t(h) * wd; ++i)
            out.v[std::size_t(oc) * h * wd + i] = bias[std::size_t(oc)];
        for (int ic = 0; ic < ic_n; ++ic) {
            const double* wk = w.data() + (std::size_t(oc) * ic_n + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    double wv = wk[ky * 3 + kx];
                    if (wv == 0.0) continue;
                    for (int y = 0; y < h; ++y) {
                        int iy = std::clamp(y + ky - 1, 0, h - 1);
                        const double* src = &in.v[(std::size_t(ic) * h + iy) * wd];
                        double* dst = &out.v[(std::size_t(oc) * h + y) * wd];
                        int dx = kx - 1;
                        int x0 = std::max(0, -dx), x1 = wd - std::max(0, dx);
                        if (dx < 0) dst[0] += wv * src[0];
                        for (int x = x0; x < x1; ++x) dst[x] += wv * src[x + dx];
                        if (dx > 0) dst[wd - 1] += wv * src[wd - 1];
                    }
                }
            }
        }
    }
}

/// Backward of conv3x3_forward. Accumulates into dw/dbias; overwrites din
/// unless din is null.
inline void conv3x3_backward(const Tensor& in, std::span<const double> w, const Tensor& dout,
                             Tensor* din, std::span<double> dw, std::span<double> dbias) {
    const int h = in.h, wd = in.w, ic_n = in.c, oc_n = dout.c;
    if (din) std::fill(din->v.begin(), din->v.end(), 0.0);
    for (int oc = 0; oc < oc_n; ++oc) {
        const double* dv = &dout.v[std::size_t(oc) * h * wd];
        double db = 0.0;
        for (std::size_t i = 0; i < std::size_t(h) * wd; ++i) db += dv[i];
        dbias[std::size_t(oc)] += db;
        for (int ic = 0; ic < ic_n; ++ic) {
            const double* wk = w.data() + (std::size_t(oc) * ic_n + ic) * 9;
            double* dwk = dw.data() + (std::size_t(oc) * ic_n + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    double wv = wk[ky * 3 + kx];
                    double grad_w = 0.0;
                    for (int y = 0; y < h; ++y) {
                        int iy = std::clamp(y + ky - 1, 0, h - 1);
                        const double* drow = dv + std::size_t(y) * wd;
                        const double* srow = &in.v[(std::size_t(ic) * h + iy) * wd];
                        double* gr = din ? &din->v[(std::size_t(ic) * h + iy) * wd] : nullptr;
                        for (int x = 0; x < wd; ++x) {
                            int ix = std::clamp(x + kx - 1, 0, wd - 1);
                            grad_w += drow[x] * srow[ix];
                            if (gr) gr[ix] += wv * drow[x];
                        }
                    }
                    dwk[ky * 3 + kx] += grad_w;
                }
            }
        }
    }
}

inline void relu_forward(const Tensor& in, Tensor& out) {
    for (std::size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] > 0.0 ? in.v[i] : 0.0;
}

inline void relu_backward(const Tensor& in, const Tensor& dout, Tensor& din) {
    for (std::size_t i = 0; i < in.size(); ++i) din.v[i] = in.v[i] > 0.0 ? dout.v[i] : 0.0;
}

}  // namespace nn

/// Explicit head inputs: the 4-channel regression target split into K and
/// B, plus the small convolution f mapping airlight to the smoke map.
/// f holds 3x3x3 weights followed by one bias.
struct HeadOutput {
    ScalarField k;
    Field3 b;
    std::array<double, 28> f{};
};

/// J = K I - B + I (clamped for export) and S = f(B / (K+1)) + bias.
inline std::pair<Image, ScalarField> head_forward(const Image& i, const HeadOutput& head) {
    KBField kb{head.k, head.b};
    for (float kv : head.k.data)
        if (!(kv > -1.0f)) throw DataError("head_forward: K must exceed -1");
    Image j = reconstruct_kb(i, kb);
    Field3 air = airlight_from_kb(kb);

    Tensor air_t(3, i.height, i.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < i.height; ++y)
            for (int x = 0; x < i.width; ++x) air_t.at(c, y, x) = air.at(y, x, c);
    Tensor s_t(1, i.height, i.width);
    nn::conv3x3_forward(air_t, std::span(head.f).first(27), std::span(head.f).subspan(27, 1), s_t);

    ScalarField s(i.height, i.width);
    for (std::size_t p = 0; p < s.size(); ++p) s.data[p] = float(s_t.v[p]);
    return {std::move(j), std::move(s)};
}

/// L = mean_px mean_ch |Jgt - J| + lambda * mean_px |Sgt - S|.
inline double loss_l1(const Image& j_gt, const Image& j, const ScalarField& s_gt,
                      const ScalarField& s, double lambda) {
    if (!j_gt.same_shape(j) || j.height != s.height || j.width != s.width || !s_gt.same_shape(s))
        throw DataError("loss_l1: shape mismatch");
    if (lambda < 0.0) throw DataError("loss_l1: lambda must be non-negative");
    double lj = 0.0;
    for (std::size_t i = 0; i < j.data.size(); ++i) lj += std::abs(double(j_gt.data[i]) - double(j.data[i]));
    double ls = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i) ls += std::abs(double(s_gt.data[i]) - double(s.data[i]));
    return lj / double(j.data.size()) + lambda * ls / double(s.data.size());
}

/// Desk-scale convolutional backbone: conv(3->c1) relu, conv(c1->c2) relu,
/// conv(c2->4), plus the f kernel of the head. K passes through
/// softplus(.) - 1 + 1e-6 so the airlight division stays total.
struct ToyModel {
    int c1 = 16;
    int c2 = 16;
    std::vector<double> params;

    static constexpr double kEps = 1e-6;

    // flat parameter layout
    std::size_t n_w1() const { return std::size_t(c1) * 3 * 9; }
    std::size_t n_w2() const { return std::size_t(c2) * c1 * 9; }
    std::size_t n_w3() const { return std::size_t(4) * c2 * 9; }
    std::size_t off_w1() const { return 0; }
    std::size_t off_b1() const { return off_w1() + n_w1(); }
    std::size_t off_w2() const { return off_b1() + c1; }
    std::size_t off_b2() const { return off_w2() + n_w2(); }
    std::size_t off_w3() const { return off_b2() + c2; }
    std::size_t off_b3() const { return off_w3() + n_w3(); }
    std::size_t off_wf() const { return off_b3() + 4; }
    std::size_t off_bf() const { return off_wf() + 27; }
    std::size_t param_count() const { return off_bf() + 1; }

    std::span<const double> slice(std::size_t off, std::size_t n) const {
        return std::span(params).subspan(off, n);
    }

    /// Identity-biased initialization: the O head starts at K ~ 0, B = 0
    /// so the model begins as a pass-through; f starts as an averaging
    /// kernel over the airlight.
    void init(uint64_t seed) {
        params.assign(param_count(), 0.0);
        Rng rng(seed);
        auto he_fill = [&](std::size_t off, std::size_t n, int fan_in) {
            double scale = std::sqrt(2.0 / double(fan_in));
            for (std::size_t i = 0; i < n; ++i) params[off + i] = scale * rng.normal();
        };
        he_fill(off_w1(), n_w1(), 3 * 9);
        he_fill(off_w2(), n_w2(), c1 * 9);
        // w3, b3 stay zero except the K bias: softplus(b) = 1 - eps => K = 0
        params[off_b3()] = std::log(std::expm1(1.0 - kEps));
        for (std::size_t i = 0; i < 27; ++i) params[off_wf() + i] = 1.0 / 27.0;
    }
};

/// Activation cache for one forward pass.
struct ForwardCache {
    Tensor input;       // 3ch
    Tensor a1, r1;      // c1
    Tensor a2, r2;      // c2
    Tensor o;           // 4ch raw head output
    Tensor k;           // 1ch, after softplus shift
    Tensor j;           // 3ch, unclamped
    Tensor air;         // 3ch
    Tensor s;           // 1ch
};

inline void model_forward(const ToyModel& m, const Tensor& input, ForwardCache& fc) {
    const int h = input.h, w = input.w;
    fc.input = input;
    fc.a1 = Tensor(m.c1, h, w);
    nn::conv3x3_forward(input, m.slice(m.off_w1(), m.n_w1()), m.slice(m.off_b1(), m.c1), fc.a1);
    fc.r1 = Tensor(m.c1, h, w);
    nn::relu_forward(fc.a1, fc.r1);
    fc.a2 = Tensor(m.c2, h, w);
    nn::conv3x3_forward(fc.r1, m.slice(m.off_w2(), m.n_w2()), m.slice(m.off_b2(), m.c2), fc.a2);
    fc.r2 = Tensor(m.c2, h, w);
    nn::relu_forward(fc.a2, fc.r2);
    fc.o = Tensor(4, h, w);
    nn::conv3x3_forward(fc.r2, m.slice(m.off_w3(), m.n_w3()), m.slice(m.off_b3(), 4), fc.o);

    fc.k = Tensor(1, h, w);
    fc.j = Tensor(3, h, w);
    fc.air = Tensor(3, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double k = nn::softplus(fc.o.at(0, y, x)) - 1.0 + ToyModel::kEps;
            fc.k.at(0, y, x) = k;
            for (int c = 0; c < 3; ++c) {
                double iv = input.at(c, y, x);
                double b = fc.o.at(1 + c, y, x);
                fc.j.at(c, y, x) = k * iv - b + iv;
                fc.air.at(c, y, x) = b / (k + 1.0);
            }
        }
    }
    fc.s = Tensor(1, h, w);
    nn::conv3x3_forward(fc.air, m.slice(m.off_wf(), 27), m.slice(m.off_bf(), 1), fc.s);
}

struct LossParts {
    double image = 0.0;
    double smoke = 0.0;
    double total = 0.0;
};

/// Forward + L1 loss + full backward; accumulates parameter gradients
/// into `grad` (same layout as params). Returns the loss split.
inline LossParts model_loss_grad(const ToyModel& m, const Tensor& input, const Tensor& j_gt,
                                 const Tensor& s_gt, double lambda, ForwardCache& fc,
                                 std::span<double> grad) {
    model_forward(m, input, fc);
    const int h = input.h, w = input.w;
    const double n_img = double(3) * h * w;
    const double n_map = double(h) * w;

    LossParts loss;
    Tensor dj(3, h, w), ds(1, h, w);
    for (std::size_t i = 0; i < fc.j.size(); ++i) {
        double d = fc.j.v[i] - j_gt.v[i];
        loss.image += std::abs(d);
        dj.v[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n_img;
    }
    for (std::size_t i = 0; i < fc.s.size(); ++i) {
        double d = fc.s.v[i] - s_gt.v[i];
        loss.smoke += std::abs(d);
        ds.v[i] = lambda * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n_map;
    }
    loss.image /= n_img;
    loss.smoke /= n_map;
    loss.total = loss.image + lambda * loss.smoke;
    if (!std::isfinite(loss.total)) throw NumericError("non-finite training loss");

    // S = conv_f(air) + bias
    Tensor dair(3, h, w);
    nn::conv3x3_backward(fc.air, m.slice(m.off_wf(), 27), ds, &dair,
                         grad.subspan(m.off_wf(), 27), grad.subspan(m.off_bf(), 1));

    // back through K/B head into the raw 4-channel output
    Tensor dout(4, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double k = fc.k.at(0, y, x);
            double kp1 = k + 1.0;
            double dk = 0.0;
            for (int c = 0; c < 3; ++c) {
                double djc = dj.at(c, y, x);
                double dac = dair.at(c, y, x);
                double b = fc.o.at(1 + c, y, x);
                dk += djc * input.at(c, y, x) - dac * b / (kp1 * kp1);
                dout.at(1 + c, y, x) = -djc + dac / kp1;
            }
            dout.at(0, y, x) = dk * nn::sigmoid(fc.o.at(0, y, x));
        }
    }

    Tensor dr2(m.c2, h, w);
    nn::conv3x3_backward(fc.r2, m.slice(m.off_w3(), m.n_w3()), dout, &dr2,
                         grad.subspan(m.off_w3(), m.n_w3()), grad.subspan(m.off_b3(), 4));
    Tensor da2(m.c2, h, w);
    nn::relu_backward(fc.a2, dr2, da2);
    Tensor dr1(m.c1, h, w);
    nn::conv3x3_backward(fc.r1, m.slice(m.off_w2(), m.n_w2()), da2, &dr1,
                         grad.subspan(m.off_w2(), m.n_w2()), grad.subspan(m.off_b2(), m.c2));
    Tensor da1(m.c1, h, w);
    nn::relu_backward(fc.a1, dr1, da1);
    nn::conv3x3_backward(fc.input, m.slice(m.off_w1(), m.n_w1()), da1, nullptr,
                         grad.subspan(m.off_w1(), m.n_w1()), grad.subspan(m.off_b1(), m.c1));
    return loss;
}

/// Max over coordinates of the symmetric relative error between the
/// analytic gradient and a central difference with the given step.
inline double grad_check(const std::function<double(std::span<const double>)>& value,
                         const std::function<std::vector<double>(std::span<const double>)>& gradient,
                         std::vector<double> x, double step) {
    if (!(step > 0.0)) throw DataError("grad_check: step must be positive");
    std::vector<double> analytic = gradient(x);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double saved = x[i];
        x[i] = saved + step;
        double fp = value(x);
        x[i] = saved - step;
        double fm = value(x);
        x[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite function value");
        double fd = (fp - fm) / (2.0 * step);
        // the absolute floor keeps truncation noise on near-zero coordinates
        // from dominating the ratio
        double rel = std::abs(analytic[i] - fd) / std::max(1e-6, std::abs(analytic[i]) + std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

/// A randomized gradient-check probe with kinks avoided by construction:
/// ReLU pre-activations carry a positive margin and the L1 residuals are
/// pinned at +-0.3, so the loss is smooth in a neighborhood wide enough
/// for central differences.
struct GradCheckProbe {
    ToyModel model;
    Tensor input, j_gt, s_gt;
};

inline GradCheckProbe make_gradcheck_probe(uint64_t seed, int h = 16, int w = 20, int c1 = 8,
                                           int c2 = 8) {
    GradCheckProbe p;
    p.model.c1 = c1;
    p.model.c2 = c2;
    p.model.init(seed);
    Rng rng(derive_seed(seed, 0x6bcull));
    auto& params = p.model.params;
    for (std::size_t i = 0; i < p.model.n_w2(); ++i)
        params[p.model.off_w2() + i] = 0.05 * rng.normal();
    for (std::size_t i = 0; i < p.model.n_w3(); ++i)
        params[p.model.off_w3() + i] = 0.05 * rng.normal();
    for (std::size_t i = 0; i < 27; ++i) params[p.model.off_wf() + i] += 0.02 * rng.normal();

    p.input = Tensor(3, h, w);
    for (auto& v : p.input.v) v = rng.uniform(0.05, 0.95);

    // push pre-activations above a margin, layer by layer
    constexpr double margin = 0.05;
    ForwardCache fc;
    for (int layer = 0; layer < 2; ++layer) {
        model_forward(p.model, p.input, fc);
        const Tensor& act = layer == 0 ? fc.a1 : fc.a2;
        double lo = *std::min_element(act.v.begin(), act.v.end());
        if (lo < margin) {
            std::size_t off = layer == 0 ? p.model.off_b1() : p.model.off_b2();
            std::size_t n = layer == 0 ? std::size_t(c1) : std::size_t(c2);
            for (std::size_t i = 0; i < n; ++i) params[off + i] += margin - lo + 0.1;
        }
    }
    model_forward(p.model, p.input, fc);

    // residuals pinned away from the |.| kink
    p.j_gt = Tensor(3, h, w);
    for (std::size_t i = 0; i < fc.j.size(); ++i)
        p.j_gt.v[i] = fc.j.v[i] + (rng.next_double() < 0.5 ? -0.3 : 0.3);
    p.s_gt = Tensor(1, h, w);
    for (std::size_t i = 0; i < fc.s.size(); ++i)
        p.s_gt.v[i] = fc.s.v[i] + (rng.next_double() < 0.5 ? -0.3 : 0.3);
    return p;
}

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
    int steps = 2000;
    double lr_max = 1e-3;
    double lr_min = 1e-5;
    double lambda = 0.1;
    double weight_decay = 1e-4;
    uint64_t seed = 0;
    int model_c1 = 16;
    int model_c2 = 16;
    bool deterministic = true;  // fixed sample order and reduction order
};

struct TrainLogRow {
    int step = 0;
    double lr = 0.0;
    double loss_image = 0.0;
    double loss_smoke = 0.0;
    double loss_total = 0.0;
};

inline std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
    std::string out = "step,lr,loss_image,loss_smoke,loss_total\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", r.step, r.lr, r.loss_image,
                      r.loss_smoke, r.loss_total);
        out += buf;
    }
    return out;
}

/// Cosine annealing from lr_max at step 0 to lr_min at the last step.
inline double cosine_lr(int step, int steps, double lr_max, double lr_min) {
    if (steps <= 1) return lr_max;
    double phase = double(step) / double(steps - 1);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.14159265358979323846 * phase));
}

struct TrainSample {
    Tensor input;  // smoky image
    Tensor j_gt;   // clean image
    Tensor s_gt;   // smoke map
};

inline std::vector<TrainSample> load_training_set(const std::filesystem::path& manifest) {
    std::vector<PairRecord> records = read_manifest(manifest);
    std::vector<TrainSample> samples(records.size());
    parallel_for(records.size(), [&](std::size_t i) {
        samples[i].input = to_tensor(load_image(records[i].smoky_path));
        samples[i].j_gt = to_tensor(load_image(records[i].clean_path));
        samples[i].s_gt = to_tensor(load_field(records[i].smoke_map_path));
    });
    return samples;
}

/// AdamW-style training of the toy model: one sample per step, cosine
/// learning rate, decoupled weight decay. Deterministic given seed.
inline std::pair<ToyModel, std::vector<TrainLogRow>> train_toy(
    const std::vector<TrainSample>& samples, const TrainConfig& cfg) {
    if (samples.size() < 2) throw DataError("train_toy: need at least 2 training pairs");
    ToyModel model;
    model.c1 = cfg.model_c1;
    model.c2 = cfg.model_c2;
    model.init(cfg.seed);

    const std::size_t n = model.param_count();
    std::vector<double> grad(n), m1(n, 0.0), m2(n, 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    Rng rng(derive_seed(cfg.seed, 0xadau));
    std::vector<TrainLogRow> log;
    log.reserve(std::size_t(cfg.steps));
    ForwardCache fc;

    for (int step = 0; step < cfg.steps; ++step) {
        const TrainSample& s = samples[std::size_t(rng.uniform_int(0, int64_t(samples.size()) - 1))];
        std::fill(grad.begin(), grad.end(), 0.0);
        LossParts loss = model_loss_grad(model, s.input, s.j_gt, s.s_gt, cfg.lambda, fc, grad);

        double lr = cosine_lr(step, cfg.steps, cfg.lr_max, cfg.lr_min);
        double bc1 = 1.0 - std::pow(beta1, step + 1);
        double bc2 = 1.0 - std::pow(beta2, step + 1);
        for (std::size_t i = 0; i < n; ++i) {
            m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
            m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
            double update = (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + adam_eps);
            model.params[i] -= lr * (update + cfg.weight_decay * model.params[i]);
        }
        log.push_back({step, lr, loss.image, loss.smoke, loss.total});
    }
    return {std::move(model), std::move(log)};
}

inline std::pair<ToyModel, std::vector<TrainLogRow>> train_toy(const std::filesystem::path& manifest,
                                                               const TrainConfig& cfg) {
    return train_toy(load_training_set(manifest), cfg);
}

/// Full learned pipeline: backbone -> O -> K/B head. The backbone is fully
/// convolutional, so any resolution is accepted.
inline std::pair<Image, ScalarField> desmoke_learned(const ToyModel& model, const Image& img) {
    ForwardCache fc;
    model_forward(model, to_tensor(img), fc);
    Image j(img.height, img.width);
    ScalarField s(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) j.at(y, x, c) = clamp01(float(fc.j.at(c, y, x)));
            s.at(y, x) = clamp01(float(fc.s.at(0, y, x)));
        }
    }
    return {std::move(j), std::move(s)};
}

// ---------------------------------------------------------------------------
// checkpoint container: 8-byte magic, version, arch, raw doubles

inline constexpr char kCheckpointMagic[8] = {'S', 'M', 'B', 'C', 'K', 'P', 'T', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(kCheckpointMagic, 8);
        uint32_t ver = kCheckpointVersion;
        int32_t c1 = model.c1, c2 = model.c2;
        uint64_t count = model.params.size();
        out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
        out.write(reinterpret_cast<const char*>(&c1), sizeof(c1));
        out.write(reinterpret_cast<const char*>(&c2), sizeof(c2));
        out.write(reinterpret_cast<const char*>(&count), sizeof(count));
        out.write(reinterpret_cast<const char*>(model.params.data()),
                  std::streamsize(count * sizeof(double)));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline ToyModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path.string());
    uint32_t ver = 0;
    int32_t c1 = 0, c2 = 0;
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    in.read(reinterpret_cast<char*>(&c1), sizeof(c1));
    in.read(reinterpret_cast<char*>(&c2), sizeof(c2));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || ver != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    ToyModel model;
    model.c1 = c1;
    model.c2 = c2;
    if (count != model.param_count()) throw DataError("checkpoint parameter count mismatch");
    model.params.resize(count);
    in.read(reinterpret_cast<char*>(model.params.data()), std::streamsize(count * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint: " + path.string());
    return model;
}

}  // namespace smokebench
