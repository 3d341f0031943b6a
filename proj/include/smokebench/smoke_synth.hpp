#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokebench/image.hpp"

namespace smokebench {

/// Randomized synthesis parameters for one smoky/clean pair. Identical
/// params produce bit-identical output.
struct SmokeParams {
    uint64_t seed = 0;
    float density = 0.5f;                          // global opacity scale, [0,1]
    std::array<float, 3> color{1.0f, 1.0f, 1.0f};  // smoke tint, [0.7,1.0] each
    int noise_octaves = 4;                         // 3..6
    float noise_base_scale = 64.0f;                // base wavelength in pixels
    float blend_gamma = 1.0f;                      // illumination enhancement exponent, [0.8,1.2]
    std::array<float, 3> channel_gain{1.0f, 1.0f, 1.0f};  // RGB correction, [0.9,1.1] each

    float color_mean() const { return (color[0] + color[1] + color[2]) / 3.0f; }
};

struct PairRecord {
    std::string clean_path;
    std::string smoky_path;
    std::string smoke_map_path;
    SmokeParams params;
    int res_h = 512;
    int res_w = 640;
};

namespace detail {

/// Lattice value for octave `o` at integer coords, uniform in [0,1).
inline double lattice_value(uint64_t seed, int octave, int64_t ix, int64_t iy) {
    uint64_t h = splitmix64(seed ^ splitmix64(uint64_t(octave) * 0x9e3779b97f4a7c15ull));
    h = splitmix64(h ^ splitmix64(uint64_t(ix) * 0xd1b54a32d192ed03ull));
    h = splitmix64(h ^ splitmix64(uint64_t(iy) * 0x8cb92ba72f3d8dd7ull));
    return double(h >> 11) * 0x1.0p-53;
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace detail

/// Multi-octave value noise: octave o has amplitude 2^-o and wavelength
/// noise_base_scale / 2^o. The sum is min-max normalized to [0,1] and
/// scaled by density. Deterministic in params.seed.
inline ScalarField gen_smoke_map(int h, int w, const SmokeParams& params) {
    if (h < 8 || w < 8) throw DataError("gen_smoke_map: dimensions must be at least 8x8");
    ScalarField map(h, w);
    if (params.density <= 0.0f) return map;

    std::vector<double> acc(std::size_t(h) * w, 0.0);
    for (int o = 0; o < params.noise_octaves; ++o) {
        double amp = std::ldexp(1.0, -o);
        double wavelength = std::max(1.0, double(params.noise_base_scale) / std::ldexp(1.0, o));
        for (int y = 0; y < h; ++y) {
            double fy = y / wavelength;
            int64_t iy = int64_t(std::floor(fy));
            double ty = detail::smoothstep(fy - double(iy));
            for (int x = 0; x < w; ++x) {
                double fx = x / wavelength;
                int64_t ix = int64_t(std::floor(fx));
                double tx = detail::smoothstep(fx - double(ix));
                double v00 = detail::lattice_value(params.seed, o, ix, iy);
                double v10 = detail::lattice_value(params.seed, o, ix + 1, iy);
                double v01 = detail::lattice_value(params.seed, o, ix, iy + 1);
                double v11 = detail::lattice_value(params.seed, o, ix + 1, iy + 1);
                double top = v00 * (1.0 - tx) + v10 * tx;
                double bot = v01 * (1.0 - tx) + v11 * tx;
                acc[std::size_t(y) * w + x] += amp * (top * (1.0 - ty) + bot * ty);
            }
        }
    }
    auto [lo_it, hi_it] = std::minmax_element(acc.begin(), acc.end());
    double lo = *lo_it, span = *hi_it - *lo_it;
    if (span <= 0.0) span = 1.0;
    for (std::size_t i = 0; i < acc.size(); ++i)
        map.data[i] = float(params.density * (acc[i] - lo) / span);
    return map;
}

/// Alpha blend with per-channel gain and gamma illumination enhancement:
///   I_c = clamp((1-a) * J_c^gamma + a * color_c * gain_c),  a = s_map
/// Returns the smoky image and the supervised smoke map a * mean(color).
inline std::pair<Image, ScalarField> composite_smoke(const Image& j, const ScalarField& s_map,
                                                     const SmokeParams& params) {
    if (j.height != s_map.height || j.width != s_map.width)
        throw DataError("composite_smoke: shape mismatch");
    Image smoky(j.height, j.width);
    ScalarField gt(j.height, j.width);
    const float cmean = params.color_mean();
    for (int y = 0; y < j.height; ++y) {
        for (int x = 0; x < j.width; ++x) {
            float alpha = s_map.at(y, x);
            gt.at(y, x) = alpha * cmean;
            for (int c = 0; c < 3; ++c) {
                float lit = std::pow(j.at(y, x, c), params.blend_gamma);
                float smoke = params.color[std::size_t(c)] * params.channel_gain[std::size_t(c)];
                smoky.at(y, x, c) = clamp01((1.0f - alpha) * lit + alpha * smoke);
            }
        }
    }
    return {std::move(smoky), std::move(gt)};
}

/// Domain randomization: every field drawn uniformly from its declared
/// range, deterministically from (master_seed, index).
inline SmokeParams randomize_params(uint64_t master_seed, uint64_t index) {
    SmokeParams p;
    p.seed = derive_seed(master_seed, index);
    Rng rng(p.seed);
    p.density = float(rng.uniform(0.0, 1.0));
    for (auto& c : p.color) c = float(rng.uniform(0.7, 1.0));
    p.noise_octaves = int(rng.uniform_int(3, 6));
    p.noise_base_scale = float(rng.uniform(32.0, 160.0));
    p.blend_gamma = float(rng.uniform(0.8, 1.2));
    for (auto& g : p.channel_gain) g = float(rng.uniform(0.9, 1.1));
    return p;
}

inline nlohmann::json record_to_json(const PairRecord& r) {
    return nlohmann::json{{"clean_path", r.clean_path},
                          {"smoky_path", r.smoky_path},
                          {"smoke_map_path", r.smoke_map_path},
                          {"seed", r.params.seed},
                          {"density", r.params.density},
                          {"color", r.params.color},
                          {"noise_octaves", r.params.noise_octaves},
                          {"noise_base_scale", r.params.noise_base_scale},
                          {"blend_gamma", r.params.blend_gamma},
                          {"channel_gain", r.params.channel_gain},
                          {"resolution", {r.res_h, r.res_w}}};
}

inline PairRecord record_from_json(const nlohmann::json& j) {
    PairRecord r;
    r.clean_path = j.at("clean_path").get<std::string>();
    r.smoky_path = j.at("smoky_path").get<std::string>();
    r.smoke_map_path = j.at("smoke_map_path").get<std::string>();
    r.params.seed = j.at("seed").get<uint64_t>();
    r.params.density = j.at("density").get<float>();
    r.params.color = j.at("color").get<std::array<float, 3>>();
    r.params.noise_octaves = j.at("noise_octaves").get<int>();
    r.params.noise_base_scale = j.at("noise_base_scale").get<float>();
    r.params.blend_gamma = j.at("blend_gamma").get<float>();
    r.params.channel_gain = j.at("channel_gain").get<std::array<float, 3>>();
    auto res = j.at("resolution");
    r.res_h = res.at(0).get<int>();
    r.res_w = res.at(1).get<int>();
    return r;
}

/// Read a line-delimited JSON manifest.
inline std::vector<PairRecord> read_manifest(const std::filesystem::path& path) {
    std::vector<PairRecord> out;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

/// Generate `count` paired smoky/clean images plus ground-truth smoke maps
/// under out_dir, cycling over the clean sources in sorted filename order.
/// Rerunning with identical inputs and master_seed is byte-reproducible.
/// Returns the manifest path.
inline std::filesystem::path generate_dataset(const std::filesystem::path& clean_dir, int count,
                                              const std::filesystem::path& out_dir,
                                              uint64_t master_seed, int res_h = 512,
                                              int res_w = 640) {
    namespace fs = std::filesystem;
    std::vector<fs::path> sources;
    if (fs::is_directory(clean_dir))
        for (const auto& e : fs::directory_iterator(clean_dir))
            if (e.is_regular_file()) sources.push_back(e.path());
    std::sort(sources.begin(), sources.end());
    if (sources.empty()) throw DataError("no clean images found in " + clean_dir.string());

    fs::create_directories(out_dir / "clean");
    fs::create_directories(out_dir / "smoky");
    fs::create_directories(out_dir / "smoke_map");

    // Each distinct source is loaded and resized once.
    int used = std::min<int>(int(sources.size()), std::max(count, 1));
    std::vector<Image> cleans(static_cast<std::size_t>(used));
    parallel_for(std::size_t(used), [&](std::size_t i) {
        cleans[i] = resize_bilinear(load_image(sources[i]), res_h, res_w);
    });

    std::vector<PairRecord> records(static_cast<std::size_t>(count));
    parallel_for(std::size_t(count), [&](std::size_t i) {
        const Image& clean = cleans[i % std::size_t(used)];
        SmokeParams params = randomize_params(master_seed, i);
        ScalarField s_map = gen_smoke_map(res_h, res_w, params);
        auto [smoky, gt] = composite_smoke(clean, s_map, params);

        char name[32];
        std::snprintf(name, sizeof(name), "pair_%06zu.png", i);
        PairRecord rec;
        rec.clean_path = (out_dir / "clean" / name).string();
        rec.smoky_path = (out_dir / "smoky" / name).string();
        rec.smoke_map_path = (out_dir / "smoke_map" / name).string();
        rec.params = params;
        rec.res_h = res_h;
        rec.res_w = res_w;
        save_image(clean, rec.clean_path);
        save_image(smoky, rec.smoky_path);
        save_field(gt, rec.smoke_map_path);
        records[i] = std::move(rec);
    });

    std::string manifest;
    for (const auto& r : records) manifest += record_to_json(r).dump() + "\n";
    fs::path manifest_path = out_dir / "manifest.jsonl";
    atomic_write_text(manifest_path, manifest);
    return manifest_path;
}

}  // namespace smokebench
