#pragma once

#include "smokebench/smoke_synth.hpp"

namespace smokebench {

/// Exact inverse of composite_smoke given the stored ground-truth smoke
/// map and the pair's synthesis parameters:
///   J_c = ((I_c - a * color_c * gain_c) / (1 - a))^(1/gamma),
/// with a = s_gt / mean(color), capped at 0.95 so the division stays
/// bounded under 8-bit quantization noise.
inline Image invert_composite(const Image& smoky, const ScalarField& s_gt, const SmokeParams& p) {
    if (smoky.height != s_gt.height || smoky.width != s_gt.width)
        throw DataError("invert_composite: shape mismatch");
    Image out(smoky.height, smoky.width);
    const float cmean = std::max(1e-6f, p.color_mean());
    const float inv_gamma = 1.0f / p.blend_gamma;
    for (int y = 0; y < smoky.height; ++y) {
        for (int x = 0; x < smoky.width; ++x) {
            float alpha = std::min(0.95f, s_gt.at(y, x) / cmean);
            for (int c = 0; c < 3; ++c) {
                float smoke = p.color[std::size_t(c)] * p.channel_gain[std::size_t(c)];
                float lit = clamp01((smoky.at(y, x, c) - alpha * smoke) / (1.0f - alpha));
                out.at(y, x, c) = std::pow(lit, inv_gamma);
            }
        }
    }
    return out;
}

}  // namespace smokebench
