// smokebench: surgical-smoke synthesis, desmoking, and evaluation harness.
//
// Subcommands: synth, desmoke, eval, gradcheck, train-toy. All commands are
// reproducible from (inputs, resolved config, seed); outputs are written
// atomically. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
// failure.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smokebench/oracle.hpp"
#include "smokebench/smokebench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smokebench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_resolved_config(const fs::path& out_dir, const json& cfg) {
    fs::create_directories(out_dir);
    atomic_write_text(out_dir / "resolved_config.json", cfg.dump(2) + "\n");
}

std::string pair_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair_%06zu", index);
    return buf;
}

// ---------------------------------------------------------------------- synth

struct SynthOpts {
    std::string clean_dir;
    std::string out_dir;
    int count = 10;
    uint64_t seed = 0;
    int height = 512;
    int width = 640;
};

int run_synth(const SynthOpts& o) {
    write_resolved_config(o.out_dir, json{{"command", "synth"},
                                          {"clean_dir", o.clean_dir},
                                          {"out", o.out_dir},
                                          {"count", o.count},
                                          {"seed", o.seed},
                                          {"height", o.height},
                                          {"width", o.width}});
    fs::path manifest = generate_dataset(o.clean_dir, o.count, o.out_dir, o.seed, o.height, o.width);
    std::printf("wrote %d pairs, manifest %s\n", o.count, manifest.string().c_str());
    return kExitOk;
}

// -------------------------------------------------------------------- desmoke

struct DesmokeOpts {
    std::string method = "dcp";
    std::string manifest;
    std::string input;
    std::string out_dir;
    std::string checkpoint;
    DcpConfig dcp;
};

void write_outputs(const fs::path& out_dir, const std::string& id, const Image& j,
                   const ScalarField* s) {
    save_image(j, out_dir / (id + "_J.png"));
    if (s) save_field(*s, out_dir / (id + "_S.png"));
}

int run_desmoke(const DesmokeOpts& o) {
    fs::path out_dir = o.out_dir;
    write_resolved_config(out_dir, json{{"command", "desmoke"},
                                        {"method", o.method},
                                        {"manifest", o.manifest},
                                        {"input", o.input},
                                        {"checkpoint", o.checkpoint}});
    ToyModel model;
    if (o.method == "learned") model = load_checkpoint(o.checkpoint);

    auto desmoke_one = [&](const Image& smoky, const PairRecord* rec)
        -> std::pair<Image, ScalarField> {
        if (o.method == "dcp") {
            auto [j, t, a] = dcp_desmoke(smoky, o.dcp);
            // smoke-presence analog of the learned S: mean airlight A(1-t)
            ScalarField s(t.height, t.width);
            for (std::size_t i = 0; i < t.size(); ++i)
                s.data[i] = clamp01((a[0] + a[1] + a[2]) / 3.0f * (1.0f - t.data[i]));
            return {std::move(j), std::move(s)};
        }
        if (o.method == "learned") return desmoke_learned(model, smoky);
        // invert-oracle: exact inversion from stored ground truth
        ScalarField s_gt = load_field(rec->smoke_map_path);
        return {invert_composite(smoky, s_gt, rec->params), std::move(s_gt)};
    };

    std::string eval_manifest;
    if (!o.manifest.empty()) {
        std::vector<PairRecord> records = read_manifest(o.manifest);
        std::vector<std::string> lines(records.size());
        parallel_for(records.size(), [&](std::size_t i) {
            Image smoky = load_image(records[i].smoky_path);
            auto [j, s] = desmoke_one(smoky, &records[i]);
            std::string id = pair_id(i);
            write_outputs(out_dir, id, j, &s);
            lines[i] = json{{"id", id},
                            {"pred", (out_dir / (id + "_J.png")).string()},
                            {"gt", records[i].clean_path}}
                           .dump();
        });
        for (const auto& l : lines) eval_manifest += l + "\n";
        atomic_write_text(out_dir / "eval_manifest.jsonl", eval_manifest);
        std::printf("desmoked %zu pairs with method %s\n", records.size(), o.method.c_str());
    } else {
        Image smoky = load_image(o.input);
        auto [j, s] = desmoke_one(smoky, nullptr);
        std::string id = fs::path(o.input).stem().string();
        write_outputs(out_dir, id, j, &s);
        std::printf("desmoked %s with method %s\n", o.input.c_str(), o.method.c_str());
    }
    return kExitOk;
}

// ----------------------------------------------------------------------- eval

struct EvalOpts {
    std::string manifest;
    std::string out_dir;
    std::string strips_dir;
};

ScalarField load_depth_csv(const fs::path& path) {
    std::string text = read_text(path);
    std::vector<std::vector<float>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        std::vector<float> row;
        std::size_t p = 0;
        while (p <= line.size()) {
            std::size_t comma = line.find(',', p);
            if (comma == std::string::npos) comma = line.size();
            row.push_back(std::stof(line.substr(p, comma - p)));
            p = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("empty depth csv: " + path.string());
    ScalarField f(int(rows.size()), int(rows[0].size()));
    for (int y = 0; y < f.height; ++y) {
        if (rows[std::size_t(y)].size() != std::size_t(f.width))
            throw DataError("ragged depth csv: " + path.string());
        for (int x = 0; x < f.width; ++x) f.at(y, x) = rows[std::size_t(y)][std::size_t(x)];
    }
    return f;
}

Image comparison_strip(const Image& gt, const Image& pred) {
    Image strip(gt.height, gt.width * 3);
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x)
            for (int c = 0; c < 3; ++c) {
                strip.at(y, x, c) = gt.at(y, x, c);
                strip.at(y, x + gt.width, c) = pred.at(y, x, c);
                strip.at(y, x + 2 * gt.width, c) =
                    clamp01(5.0f * std::abs(gt.at(y, x, c) - pred.at(y, x, c)));
            }
    return strip;
}

int run_eval(const EvalOpts& o) {
    fs::path out_dir = o.out_dir;
    write_resolved_config(out_dir, json{{"command", "eval"},
                                        {"manifest", o.manifest},
                                        {"strips", o.strips_dir}});
    std::vector<json> entries;
    {
        std::istringstream in(read_text(o.manifest));
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) entries.push_back(json::parse(line));
    }
    if (entries.empty()) throw DataError("empty eval manifest: " + o.manifest);
    if (!o.strips_dir.empty()) fs::create_directories(o.strips_dir);

    std::vector<MetricRecord> records(entries.size());
    parallel_for(entries.size(), [&](std::size_t i) {
        const json& e = entries[i];
        MetricRecord rec;
        rec.id = e.contains("id") ? e.at("id").get<std::string>() : pair_id(i);
        std::string pred_path = e.at("pred").get<std::string>();
        if (!fs::exists(pred_path))
            throw DataError("missing prediction file for record '" + rec.id + "': " + pred_path);
        Image pred = load_image(pred_path);
        Image gt = load_image(e.at("gt").get<std::string>());
        if (!pred.same_shape(gt))
            throw DataError("prediction/ground-truth shape mismatch for record '" + rec.id + "'");
        rec.ssim = ssim(pred, gt);
        rec.psnr = psnr(pred, gt);
        if (e.contains("depth_pred")) {
            ScalarField dp = load_depth_csv(e.at("depth_pred").get<std::string>());
            ScalarField dg = load_depth_csv(e.at("depth_gt").get<std::string>());
            ScalarField mask = e.contains("depth_mask")
                                   ? load_field(e.at("depth_mask").get<std::string>())
                                   : ScalarField(dp.height, dp.width, 1.0f);
            rec.mae_mm = mae_depth(dp, dg, mask);
        }
        if (e.contains("mask_pred"))
            rec.iou = iou(load_field(e.at("mask_pred").get<std::string>()),
                          load_field(e.at("mask_gt").get<std::string>()));
        if (!o.strips_dir.empty())
            save_image(comparison_strip(gt, pred), fs::path(o.strips_dir) / (rec.id + "_strip.png"));
        records[i] = std::move(rec);
    });

    MetricReport report = aggregate(std::move(records));
    atomic_write_text(out_dir / "report.csv", report_csv(report));
    atomic_write_text(out_dir / "report.json", report_json(report).dump(2) + "\n");
    std::printf("ssim %s  psnr %s\n", format_mean_std(report.ssim).c_str(),
                format_mean_std(report.psnr).c_str());
    if (report.mae_mm.count > 0) std::printf("mae_mm %s\n", format_mean_std(report.mae_mm).c_str());
    if (report.iou.count > 0) std::printf("iou %s\n", format_mean_std(report.iou).c_str());
    return kExitOk;
}

// ------------------------------------------------------------------ gradcheck

struct GradcheckOpts {
    int probes = 20;
    std::vector<double> steps{1e-3};
    double tolerance = 1e-4;
    uint64_t seed = 0;
    bool corrupt = false;  // negative-control hook
};

int run_gradcheck(const GradcheckOpts& o) {
    bool all_pass = true;
    for (double step : o.steps) {
        for (int probe = 0; probe < o.probes; ++probe) {
            GradCheckProbe p = make_gradcheck_probe(derive_seed(o.seed, uint64_t(probe)));
            auto value = [&](std::span<const double> x) {
                ToyModel m = p.model;
                m.params.assign(x.begin(), x.end());
                ForwardCache fc;
                std::vector<double> g(m.param_count(), 0.0);
                return model_loss_grad(m, p.input, p.j_gt, p.s_gt, 0.1, fc, g).total;
            };
            auto gradient = [&](std::span<const double> x) {
                ToyModel m = p.model;
                m.params.assign(x.begin(), x.end());
                ForwardCache fc;
                std::vector<double> g(m.param_count(), 0.0);
                model_loss_grad(m, p.input, p.j_gt, p.s_gt, 0.1, fc, g);
                if (o.corrupt)
                    for (auto& v : g) v = v * 1.5 + 1e-3;
                return g;
            };
            double err = grad_check(value, gradient, p.model.params, step);
            bool pass = err < o.tolerance;
            all_pass = all_pass && pass;
            std::printf("probe %2d step %.1e rel_err %.3e %s\n", probe, step, err,
                        pass ? "pass" : "FAIL");
        }
    }
    std::printf("gradcheck %s\n", all_pass ? "PASS" : "FAIL");
    return all_pass ? kExitOk : kExitNumeric;
}

// ------------------------------------------------------------------ train-toy

struct TrainOpts {
    std::string manifest;
    std::string out_dir;
    TrainConfig cfg;
};

int run_train(const TrainOpts& o) {
    write_resolved_config(o.out_dir, json{{"command", "train-toy"},
                                          {"manifest", o.manifest},
                                          {"steps", o.cfg.steps},
                                          {"lr_max", o.cfg.lr_max},
                                          {"lr_min", o.cfg.lr_min},
                                          {"lambda", o.cfg.lambda},
                                          {"weight_decay", o.cfg.weight_decay},
                                          {"seed", o.cfg.seed},
                                          {"model_c1", o.cfg.model_c1},
                                          {"model_c2", o.cfg.model_c2},
                                          {"deterministic", o.cfg.deterministic}});
    auto samples = load_training_set(o.manifest);
    if (o.cfg.steps > 0 && samples.size() < 2)
        throw DataError("training needs at least 2 pairs, manifest has " +
                        std::to_string(samples.size()));
    ToyModel model;
    std::vector<TrainLogRow> log;
    if (o.cfg.steps == 0) {
        model.c1 = o.cfg.model_c1;
        model.c2 = o.cfg.model_c2;
        model.init(o.cfg.seed);
    } else {
        std::tie(model, log) = train_toy(samples, o.cfg);
    }
    fs::path out_dir = o.out_dir;
    save_checkpoint(model, out_dir / "checkpoint.bin");
    atomic_write_text(out_dir / "loss_log.csv", train_log_csv(log));
    if (!log.empty())
        std::printf("trained %d steps, final loss %.6f\n", o.cfg.steps, log.back().loss_total);
    else
        std::printf("wrote initialization checkpoint (0 steps)\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surgical smoke synthesis and desmoking toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");
    uint64_t global_seed = 0;
    bool deterministic = false;
    app.add_option("--seed", global_seed, "global seed (commands may override)");
    app.add_flag("--deterministic", deterministic, "fixed reduction order everywhere");

    SynthOpts synth;
    auto* c_synth = app.add_subcommand("synth", "generate paired smoky/clean data");
    c_synth->add_option("--clean-dir", synth.clean_dir, "directory of clean images")->required();
    c_synth->add_option("--out", synth.out_dir, "output directory")->required();
    c_synth->add_option("--count", synth.count, "number of pairs");
    c_synth->add_option("--seed", synth.seed, "master seed");
    c_synth->add_option("--height", synth.height, "output height");
    c_synth->add_option("--width", synth.width, "output width");

    DesmokeOpts desmoke;
    auto* c_desmoke = app.add_subcommand("desmoke", "remove smoke from images");
    c_desmoke->add_option("--method", desmoke.method, "dcp | learned | invert-oracle")
        ->check(CLI::IsMember({"dcp", "learned", "invert-oracle"}));
    c_desmoke->add_option("--manifest", desmoke.manifest, "synth manifest to process");
    c_desmoke->add_option("--input", desmoke.input, "single input image");
    c_desmoke->add_option("--out", desmoke.out_dir, "output directory")->required();
    c_desmoke->add_option("--checkpoint", desmoke.checkpoint, "model checkpoint (learned)");
    c_desmoke->add_option("--dcp-omega", desmoke.dcp.omega, "haze retention factor");
    c_desmoke->add_option("--dcp-patch-radius", desmoke.dcp.patch_radius, "dark channel radius");
    c_desmoke->add_option("--dcp-t-floor", desmoke.dcp.t_floor, "transmission floor");

    EvalOpts eval;
    auto* c_eval = app.add_subcommand("eval", "score predictions against ground truth");
    c_eval->add_option("--manifest", eval.manifest, "eval manifest (jsonl)")->required();
    c_eval->add_option("--out", eval.out_dir, "report directory")->required();
    c_eval->add_option("--strips", eval.strips_dir, "write side-by-side comparison strips here");

    GradcheckOpts gc;
    auto* c_gc = app.add_subcommand("gradcheck", "verify analytic gradients");
    c_gc->add_option("--probes", gc.probes, "number of random probes");
    c_gc->add_option("--step", gc.steps, "central-difference step(s)");
    c_gc->add_option("--tolerance", gc.tolerance, "max relative error");
    c_gc->add_option("--seed", gc.seed, "probe seed");
    c_gc->add_flag("--corrupt", gc.corrupt, "corrupt analytic gradients (negative control)");

    TrainOpts train;
    auto* c_train = app.add_subcommand("train-toy", "train the desk-scale desmoker");
    c_train->add_option("--manifest", train.manifest, "training manifest")->required();
    c_train->add_option("--out", train.out_dir, "output directory")->required();
    c_train->add_option("--steps", train.cfg.steps, "training steps");
    c_train->add_option("--lr-max", train.cfg.lr_max, "peak learning rate");
    c_train->add_option("--lr-min", train.cfg.lr_min, "final learning rate");
    c_train->add_option("--lambda", train.cfg.lambda, "smoke-map loss weight");
    c_train->add_option("--weight-decay", train.cfg.weight_decay, "decoupled weight decay");
    c_train->add_option("--seed", train.cfg.seed, "training seed");
    c_train->add_option("--c1", train.cfg.model_c1, "first hidden width");
    c_train->add_option("--c2", train.cfg.model_c2, "second hidden width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_desmoke) {
            if (desmoke.manifest.empty() && desmoke.input.empty()) {
                std::fprintf(stderr, "error: desmoke needs --manifest or --input\n");
                return kExitUsage;
            }
            if (desmoke.method == "learned" && desmoke.checkpoint.empty()) {
                std::fprintf(stderr, "error: --method learned requires --checkpoint\n");
                return kExitUsage;
            }
            if (desmoke.method == "invert-oracle" && desmoke.manifest.empty()) {
                std::fprintf(stderr, "error: --method invert-oracle requires --manifest\n");
                return kExitUsage;
            }
            return run_desmoke(desmoke);
        }
        if (*c_eval) return run_eval(eval);
        if (*c_gc) return run_gradcheck(gc);
        if (*c_train) {
            train.cfg.deterministic = deterministic || train.cfg.deterministic;
            return run_train(train);
        }
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
