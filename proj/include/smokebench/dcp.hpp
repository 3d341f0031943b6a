#pragma once

#include <numeric>
#include <tuple>
#include <vector>

#include "smokebench/scattering.hpp"

namespace smokebench {

/// Classical dark-channel-prior settings.
struct DcpConfig {
    int patch_radius = 7;             // 15x15 dark-channel window
    float omega = 0.95f;              // haze retention factor
    float t_floor = 0.1f;             // transmission lower bound
    float airlight_fraction = 0.001f; // brightest dark-channel fraction
    int guided_radius = 30;
    float guided_eps = 1e-3f;

    void validate() const {
        if (!(omega > 0.0f && omega <= 1.0f)) throw DataError("omega must lie in (0,1]");
        if (!(t_floor > 0.0f && t_floor < 1.0f)) throw DataError("t_floor must lie in (0,1)");
        if (!(airlight_fraction > 0.0f && airlight_fraction <= 0.05f))
            throw DataError("airlight_fraction must lie in (0,0.05]");
    }
};

namespace detail {

/// Box filter with edge-normalized counts, via integral image (doubles).
inline ScalarField box_filter(const ScalarField& f, int radius) {
    const int h = f.height, w = f.width;
    std::vector<double> integral(std::size_t(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            row += f.at(y, x);
            integral[std::size_t(y + 1) * (w + 1) + x + 1] =
                integral[std::size_t(y) * (w + 1) + x + 1] + row;
        }
    }
    ScalarField out(h, w);
    for (int y = 0; y < h; ++y) {
        int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
        for (int x = 0; x < w; ++x) {
            int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
            double sum = integral[std::size_t(y1 + 1) * (w + 1) + x1 + 1] -
                         integral[std::size_t(y0) * (w + 1) + x1 + 1] -
                         integral[std::size_t(y1 + 1) * (w + 1) + x0] +
                         integral[std::size_t(y0) * (w + 1) + x0];
            out.at(y, x) = float(sum / (double(y1 - y0 + 1) * (x1 - x0 + 1)));
        }
    }
    return out;
}

inline ScalarField luma(const Image& img) {
    ScalarField g(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            g.at(y, x) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
                         0.114f * img.at(y, x, 2);
    return g;
}

}  // namespace detail

/// Per-pixel minimum over channels and over the (2r+1)^2 neighborhood,
/// edge-clamped. Separable (min over a square = min of axis mins).
inline ScalarField dark_channel(const Image& img, int patch_radius) {
    const int h = img.height, w = img.width;
    ScalarField chan_min(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            chan_min.at(y, x) = std::min({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
    if (patch_radius <= 0) return chan_min;

    ScalarField tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int lo = std::max(0, x - patch_radius), hi = std::min(w - 1, x + patch_radius);
            float m = chan_min.at(y, lo);
            for (int k = lo + 1; k <= hi; ++k) m = std::min(m, chan_min.at(y, k));
            tmp.at(y, x) = m;
        }
    }
    for (int y = 0; y < h; ++y) {
        int lo = std::max(0, y - patch_radius), hi = std::min(h - 1, y + patch_radius);
        for (int x = 0; x < w; ++x) {
            float m = tmp.at(lo, x);
            for (int k = lo + 1; k <= hi; ++k) m = std::min(m, tmp.at(k, x));
            out.at(y, x) = m;
        }
    }
    return out;
}

/// Among the brightest `fraction` of dark-channel pixels, pick the pixel
/// with the largest channel sum; ties go to the smallest row-major index.
/// A is floored elementwise at 0.05.
inline AtmosphericLight estimate_atmospheric_light(const Image& img, const ScalarField& dark,
                                                   float fraction) {
    if (!(fraction > 0.0f && fraction <= 0.05f))
        throw DataError("airlight fraction must lie in (0,0.05]");
    const std::size_t n = dark.size();
    const std::size_t top = std::max<std::size_t>(1, std::size_t(std::ceil(double(fraction) * n)));

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + top, idx.end(), [&](std::size_t a, std::size_t b) {
        if (dark.data[a] != dark.data[b]) return dark.data[a] > dark.data[b];
        return a < b;
    });

    std::size_t best = idx[0];
    float best_sum = -1.0f;
    for (std::size_t k = 0; k < top; ++k) {
        std::size_t i = idx[k];
        float sum = img.data[i * 3] + img.data[i * 3 + 1] + img.data[i * 3 + 2];
        if (sum > best_sum || (sum == best_sum && i < best)) {
            best_sum = sum;
            best = i;
        }
    }
    return AtmosphericLight(std::max(0.05f, img.data[best * 3]),
                            std::max(0.05f, img.data[best * 3 + 1]),
                            std::max(0.05f, img.data[best * 3 + 2]));
}

/// t_hat = 1 - omega * dark_channel(I/A), floored at cfg.t_floor.
inline ScalarField estimate_transmission(const Image& img, const AtmosphericLight& a,
                                         const DcpConfig& cfg) {
    Image normed(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) normed.at(y, x, c) = std::min(1.0f, img.at(y, x, c) / a[c]);
    ScalarField dark = dark_channel(normed, cfg.patch_radius);
    ScalarField t(img.height, img.width);
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data[i] = std::max(cfg.t_floor, 1.0f - cfg.omega * dark.data[i]);
    return t;
}

/// Guided-filter refinement of t against the grayscale guide; output
/// clamped to [t_floor, 1].
inline ScalarField refine_transmission(const ScalarField& t, const Image& guide,
                                       const DcpConfig& cfg) {
    if (t.height != guide.height || t.width != guide.width)
        throw DataError("refine_transmission: shape mismatch");
    ScalarField g = detail::luma(guide);
    const int r = cfg.guided_radius;

    ScalarField gg(t.height, t.width), gt_prod(t.height, t.width);
    for (std::size_t i = 0; i < t.size(); ++i) {
        gg.data[i] = g.data[i] * g.data[i];
        gt_prod.data[i] = g.data[i] * t.data[i];
    }
    ScalarField mean_g = detail::box_filter(g, r);
    ScalarField mean_t = detail::box_filter(t, r);
    ScalarField mean_gg = detail::box_filter(gg, r);
    ScalarField mean_gt = detail::box_filter(gt_prod, r);

    ScalarField a(t.height, t.width), b(t.height, t.width);
    for (std::size_t i = 0; i < t.size(); ++i) {
        float var = mean_gg.data[i] - mean_g.data[i] * mean_g.data[i];
        float cov = mean_gt.data[i] - mean_g.data[i] * mean_t.data[i];
        a.data[i] = cov / (var + cfg.guided_eps);
        b.data[i] = mean_t.data[i] - a.data[i] * mean_g.data[i];
    }
    ScalarField mean_a = detail::box_filter(a, r);
    ScalarField mean_b = detail::box_filter(b, r);

    ScalarField out(t.height, t.width);
    for (std::size_t i = 0; i < t.size(); ++i) {
        float q = mean_a.data[i] * g.data[i] + mean_b.data[i];
        out.data[i] = std::clamp(q, cfg.t_floor, 1.0f);
    }
    return out;
}

/// Full He-style pipeline: dark channel -> airlight -> transmission ->
/// guided refinement -> scattering inversion.
inline std::tuple<Image, ScalarField, AtmosphericLight> dcp_desmoke(const Image& img,
                                                                    const DcpConfig& cfg = {}) {
    cfg.validate();
    ScalarField dark = dark_channel(img, cfg.patch_radius);
    AtmosphericLight a = estimate_atmospheric_light(img, dark, cfg.airlight_fraction);
    ScalarField t = estimate_transmission(img, a, cfg);
    ScalarField t_ref = refine_transmission(t, img, cfg);
    Image j = invert_scattering(img, t_ref, a, cfg.t_floor);
    return {std::move(j), std::move(t_ref), a};
}

}  // namespace smokebench
