#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokebench/image.hpp"

namespace smokebench {

/// 10*log10(1/MSE) on [0,1] data, MSE over all pixels and channels.
/// Capped at 100 dB so identical images aggregate cleanly.
inline double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw DataError("psnr: shape mismatch");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = double(a.data[i]) - double(b.data[i]);
        se += d * d;
    }
    double mse = se / double(a.data.size());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline std::vector<double> gaussian_window_11() {
    std::vector<double> w(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        double d = i - 5;
        w[std::size_t(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[std::size_t(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// Separable 11x11 Gaussian filter, valid region only (no padding).
/// Input is a single channel in doubles, output is (h-10)x(w-10).
inline std::vector<double> gauss_valid(const std::vector<double>& src, int h, int w) {
    static const std::vector<double> win = gaussian_window_11();
    const int wv = w - 10;
    std::vector<double> tmp(std::size_t(h) * wv, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wv; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += win[std::size_t(k)] * src[std::size_t(y) * w + x + k];
            tmp[std::size_t(y) * wv + x] = acc;
        }
    const int hv = h - 10;
    std::vector<double> out(std::size_t(hv) * wv, 0.0);
    for (int y = 0; y < hv; ++y)
        for (int x = 0; x < wv; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += win[std::size_t(k)] * tmp[std::size_t(y + k) * wv + x];
            out[std::size_t(y) * wv + x] = acc;
        }
    return out;
}

}  // namespace detail

/// Mean SSIM over channels: 11x11 Gaussian window sigma 1.5, C1=(0.01)^2,
/// C2=(0.03)^2 on unit dynamic range, valid-region averaging.
inline double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw DataError("ssim: shape mismatch");
    if (a.height < 11 || a.width < 11) throw DataError("ssim: image smaller than 11x11 window");
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const int h = a.height, w = a.width;
    const std::size_t n = std::size_t(h) * w;

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            double av = a.data[i * 3 + std::size_t(c)];
            double bv = b.data[i * 3 + std::size_t(c)];
            x[i] = av;
            y[i] = bv;
            xx[i] = av * av;
            yy[i] = bv * bv;
            xy[i] = av * bv;
        }
        auto mu_x = detail::gauss_valid(x, h, w);
        auto mu_y = detail::gauss_valid(y, h, w);
        auto m_xx = detail::gauss_valid(xx, h, w);
        auto m_yy = detail::gauss_valid(yy, h, w);
        auto m_xy = detail::gauss_valid(xy, h, w);

        double acc = 0.0;
        for (std::size_t i = 0; i < mu_x.size(); ++i) {
            double var_x = m_xx[i] - mu_x[i] * mu_x[i];
            double var_y = m_yy[i] - mu_y[i] * mu_y[i];
            double cov = m_xy[i] - mu_x[i] * mu_y[i];
            double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
            double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
            acc += num / den;
        }
        total += acc / double(mu_x.size());
    }
    return total / 3.0;
}

/// Mean |pred - gt| in millimeters over pixels where mask = 1.
inline double mae_depth(const ScalarField& pred, const ScalarField& gt, const ScalarField& mask) {
    if (!pred.same_shape(gt) || !pred.same_shape(mask)) throw DataError("mae_depth: shape mismatch");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        float m = mask.data[i];
        if (m != 0.0f && m != 1.0f) throw DataError("mae_depth: mask must be binary");
        if (m == 1.0f) {
            acc += std::abs(double(pred.data[i]) - double(gt.data[i]));
            ++count;
        }
    }
    if (count == 0) throw DataError("mae_depth: empty mask");
    return acc / double(count);
}

/// |intersection| / |union| of binary masks; 1.0 when both are empty.
inline double iou(const ScalarField& pred, const ScalarField& gt) {
    if (!pred.same_shape(gt)) throw DataError("iou: shape mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        float p = pred.data[i], g = gt.data[i];
        if ((p != 0.0f && p != 1.0f) || (g != 0.0f && g != 1.0f))
            throw DataError("iou: masks must be binary");
        inter += std::size_t(p == 1.0f && g == 1.0f);
        uni += std::size_t(p == 1.0f || g == 1.0f);
    }
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

struct MetricRecord {
    std::string id;
    double ssim = 0.0;
    double psnr = 0.0;
    std::optional<double> mae_mm;
    std::optional<double> iou;
};

struct MetricAggregate {
    double mean = 0.0;
    double std_dev = 0.0;  // sample convention; 0 for a single record
    int count = 0;
};

struct MetricReport {
    std::vector<MetricRecord> records;
    MetricAggregate ssim, psnr, mae_mm, iou;
};

namespace detail {

inline MetricAggregate aggregate_values(const std::vector<double>& vals) {
    MetricAggregate agg;
    agg.count = int(vals.size());
    if (vals.empty()) return agg;
    double sum = 0.0;
    for (double v : vals) sum += v;
    agg.mean = sum / double(vals.size());
    if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals) ss += (v - agg.mean) * (v - agg.mean);
        agg.std_dev = std::sqrt(ss / double(vals.size() - 1));
    }
    return agg;
}

}  // namespace detail

/// Mean and sample standard deviation per metric; optional metrics
/// aggregate over the records that carry them.
inline MetricReport aggregate(std::vector<MetricRecord> records) {
    if (records.empty()) throw DataError("aggregate: no records");
    MetricReport rep;
    std::vector<double> ssims, psnrs, maes, ious;
    for (const auto& r : records) {
        ssims.push_back(r.ssim);
        psnrs.push_back(r.psnr);
        if (r.mae_mm) maes.push_back(*r.mae_mm);
        if (r.iou) ious.push_back(*r.iou);
    }
    rep.ssim = detail::aggregate_values(ssims);
    rep.psnr = detail::aggregate_values(psnrs);
    rep.mae_mm = detail::aggregate_values(maes);
    rep.iou = detail::aggregate_values(ious);
    rep.records = std::move(records);
    return rep;
}

/// "m ± s" with two decimals, the presentation used in the reports.
inline std::string format_mean_std(const MetricAggregate& agg) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", agg.mean, agg.std_dev);
    return buf;
}

inline std::string report_csv(const MetricReport& rep) {
    std::string out = "id,ssim,psnr,mae_mm,iou\n";
    char buf[256];
    for (const auto& r : rep.records) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%s,%s\n", r.id.c_str(), r.ssim, r.psnr,
                      r.mae_mm ? std::to_string(*r.mae_mm).c_str() : "",
                      r.iou ? std::to_string(*r.iou).c_str() : "");
        out += buf;
    }
    return out;
}

inline nlohmann::json report_json(const MetricReport& rep) {
    auto agg = [](const MetricAggregate& a) {
        return nlohmann::json{{"mean", a.mean},
                              {"std", a.std_dev},
                              {"count", a.count},
                              {"formatted", format_mean_std(a)}};
    };
    nlohmann::json j{{"std_convention", "sample"},
                     {"count", rep.records.size()},
                     {"ssim", agg(rep.ssim)},
                     {"psnr", agg(rep.psnr)}};
    if (rep.mae_mm.count > 0) j["mae_mm"] = agg(rep.mae_mm);
    if (rep.iou.count > 0) j["iou"] = agg(rep.iou);
    return j;
}

}  // namespace smokebench
