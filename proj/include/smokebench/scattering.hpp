#pragma once

#include <array>

#include "smokebench/image.hpp"

namespace smokebench {

/// Global atmospheric light A, per channel, each component in (0,1].
struct AtmosphericLight {
    std::array<float, 3> a{0.0f, 0.0f, 0.0f};

    AtmosphericLight() = default;
    explicit AtmosphericLight(float v) : a{v, v, v} { validate(); }
    AtmosphericLight(float r, float g, float b) : a{r, g, b} { validate(); }

    float operator[](int c) const { return a[std::size_t(c)]; }

    void validate() const {
        for (float v : a)
            if (!(v > 0.0f && v <= 1.0f)) throw DataError("atmospheric light components must lie in (0,1]");
    }
};

/// K/B reparameterization of the scattering inversion: K = 1/t - 1 shared
/// across channels, B = A(1/t - 1) per channel.
struct KBField {
    ScalarField k;
    Field3 b;
};

inline constexpr float kTransmissionFloor = 0.05f;

/// I = J t + A (1 - t), per pixel per channel. Inputs in range keep the
/// output in [0,1] without clamping.
inline Image compose_scattering(const Image& j, const ScalarField& t, const AtmosphericLight& a) {
    if (j.height != t.height || j.width != t.width) throw DataError("compose_scattering: shape mismatch");
    Image out(j.height, j.width);
    for (int y = 0; y < j.height; ++y) {
        for (int x = 0; x < j.width; ++x) {
            float tv = t.at(y, x);
            if (!(tv > 0.0f && tv <= 1.0f)) throw DataError("compose_scattering: t must lie in (0,1]");
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = j.at(y, x, c) * tv + a[c] * (1.0f - tv);
        }
    }
    return out;
}

/// J = (I - A + A t) / t with t floored at t_floor; output clamped to [0,1].
inline Image invert_scattering(const Image& i, const ScalarField& t, const AtmosphericLight& a,
                               float t_floor = kTransmissionFloor) {
    if (i.height != t.height || i.width != t.width) throw DataError("invert_scattering: shape mismatch");
    Image out(i.height, i.width);
    for (int y = 0; y < i.height; ++y) {
        for (int x = 0; x < i.width; ++x) {
            // accumulate in double: the 1/t factor amplifies single-precision
            // rounding past the agreement tolerance with the K/B route
            double tv = std::max(t.at(y, x), t_floor);
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) =
                    clamp01(float((double(i.at(y, x, c)) - a[c] + a[c] * tv) / tv));
        }
    }
    return out;
}

/// K = 1/t - 1 and B = A (1/t - 1), elementwise.
inline KBField kb_from_t_a(const ScalarField& t, const AtmosphericLight& a,
                           float t_floor = kTransmissionFloor) {
    KBField kb;
    kb.k = ScalarField(t.height, t.width);
    kb.b = Field3(t.height, t.width);
    for (int y = 0; y < t.height; ++y) {
        for (int x = 0; x < t.width; ++x) {
            float tv = t.at(y, x);
            if (!(tv >= t_floor && tv <= 1.0f)) throw DataError("kb_from_t_a: t must lie in [t_floor, 1]");
            float k = 1.0f / tv - 1.0f;
            kb.k.at(y, x) = k;
            for (int c = 0; c < 3; ++c) kb.b.at(y, x, c) = a[c] * k;
        }
    }
    return kb;
}

/// J = K I - B + I without range clamping (K broadcast over channels).
inline Field3 reconstruct_kb_raw(const Image& i, const KBField& kb) {
    if (i.height != kb.k.height || i.width != kb.k.width || i.height != kb.b.height ||
        i.width != kb.b.width)
        throw DataError("reconstruct_kb: shape mismatch");
    Field3 out(i.height, i.width);
    for (int y = 0; y < i.height; ++y) {
        for (int x = 0; x < i.width; ++x) {
            // double accumulation keeps the large K I and B terms from
            // cancelling with more than one rounding of the small result
            double k = kb.k.at(y, x);
            for (int c = 0; c < 3; ++c) {
                double iv = i.at(y, x, c);
                out.at(y, x, c) = float(k * iv - kb.b.at(y, x, c) + iv);
            }
        }
    }
    return out;
}

/// J = K I - B + I clamped to [0,1] for export.
inline Image reconstruct_kb(const Image& i, const KBField& kb) {
    return clamp_to_image(reconstruct_kb_raw(i, kb));
}

/// The airlight term A(1-t), recovered as B / (K + 1).
inline Field3 airlight_from_kb(const KBField& kb) {
    Field3 out(kb.k.height, kb.k.width);
    for (int y = 0; y < kb.k.height; ++y) {
        for (int x = 0; x < kb.k.width; ++x) {
            float denom = kb.k.at(y, x) + 1.0f;
            if (!(denom > 0.0f)) throw DataError("airlight_from_kb: K must exceed -1");
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = kb.b.at(y, x, c) / denom;
        }
    }
    return out;
}

}  // namespace smokebench
