#include <doctest.h>

#include <cstdlib>

#include "test_util.hpp"

using namespace smokebench;

namespace {

std::string cli_path() {
    const char* p = std::getenv("SMOKEBENCH_CLI");
    REQUIRE_MESSAGE(p != nullptr, "SMOKEBENCH_CLI must point at the smokebench binary");
    return p;
}

int run(const std::string& args) {
    std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli exit-code contract") {
    auto dir = test::temp_dir("cli_codes");
    CHECK(run("") == 1);                                            // usage
    CHECK(run("desmoke --out " + (dir / "o").string()) == 1);       // needs input
    CHECK(run("desmoke --method learned --input x.png --out " + (dir / "o").string()) == 1);
    CHECK(run("desmoke --method invert-oracle --input x.png --out " + (dir / "o").string()) == 1);
    CHECK(run("synth --clean-dir " + (dir / "nonexistent").string() + " --out " +
              (dir / "o").string()) == 2);                          // data error
    CHECK(run("gradcheck --probes 2 --corrupt") == 3);              // numeric failure
    CHECK(run("gradcheck --probes 2") == 0);
}

TEST_CASE("synth -> desmoke -> eval round trip through the cli") {
    auto root = test::temp_dir("cli_flow");
    test::make_clean_fixture(root / "clean", 3, 32, 40, 90);

    std::string synth = "synth --clean-dir " + (root / "clean").string() + " --out " +
                        (root / "data").string() + " --count 6 --seed 5 --height 32 --width 40";
    REQUIRE(run(synth) == 0);
    auto records = read_manifest(root / "data" / "manifest.jsonl");
    CHECK(records.size() == 6);
    CHECK(std::filesystem::exists(root / "data" / "resolved_config.json"));

    // count 0 is a valid empty manifest
    CHECK(run("synth --clean-dir " + (root / "clean").string() + " --out " +
              (root / "empty").string() + " --count 0 --seed 5") == 0);
    CHECK(read_manifest(root / "empty" / "manifest.jsonl").empty());

    // unknown flag is a usage error
    CHECK(run(synth + " --no-such-flag") == 1);

    // deterministic rerun: byte-identical images
    std::string synth2 = "synth --clean-dir " + (root / "clean").string() + " --out " +
                         (root / "data2").string() + " --count 6 --seed 5 --height 32 --width 40";
    REQUIRE(run(synth2) == 0);
    auto records2 = read_manifest(root / "data2" / "manifest.jsonl");
    for (std::size_t i = 0; i < records.size(); ++i)
        CHECK(read_text(records[i].smoky_path) == read_text(records2[i].smoky_path));

    // dcp desmoke + eval
    REQUIRE(run("desmoke --method dcp --manifest " + (root / "data" / "manifest.jsonl").string() +
                " --out " + (root / "dcp").string()) == 0);
    REQUIRE(run("eval --manifest " + (root / "dcp" / "eval_manifest.jsonl").string() + " --out " +
                (root / "dcp_eval").string()) == 0);
    CHECK(std::filesystem::exists(root / "dcp_eval" / "report.csv"));
    CHECK(std::filesystem::exists(root / "dcp_eval" / "report.json"));

    // predictions identical to ground truth score perfectly
    std::string ident;
    for (std::size_t i = 0; i < records.size(); ++i)
        ident += nlohmann::json{{"id", "p" + std::to_string(i)},
                                {"pred", records[i].clean_path},
                                {"gt", records[i].clean_path}}
                     .dump() +
                 "\n";
    atomic_write_text(root / "ident.jsonl", ident);
    REQUIRE(run("eval --manifest " + (root / "ident.jsonl").string() + " --out " +
                (root / "ident_eval").string()) == 0);
    auto report = nlohmann::json::parse(read_text(root / "ident_eval" / "report.json"));
    CHECK(report["ssim"]["formatted"] == "1.00 ± 0.00");
    CHECK(report["psnr"]["formatted"] == "100.00 ± 0.00");

    // missing prediction file is a data error naming the record
    atomic_write_text(root / "broken.jsonl",
                      nlohmann::json{{"id", "gone"},
                                     {"pred", (root / "nope.png").string()},
                                     {"gt", records[0].clean_path}}
                              .dump() +
                          "\n");
    CHECK(run("eval --manifest " + (root / "broken.jsonl").string() + " --out " +
              (root / "broken_eval").string()) == 2);
}

TEST_CASE("eval aggregates a two-pair fixture with known diffs") {
    auto root = test::temp_dir("cli_eval2");
    // gt constant 0.5; predictions off by 0.1 and 0.0 -> psnr 20 and 100
    Image gt(16, 16, 0.5f);
    Image off(16, 16, 0.6f);
    save_image(gt, root / "gt.png");
    save_image(off, root / "off.png");
    std::string manifest =
        nlohmann::json{{"id", "a"}, {"pred", (root / "off.png").string()}, {"gt", (root / "gt.png").string()}}.dump() + "\n" +
        nlohmann::json{{"id", "b"}, {"pred", (root / "gt.png").string()}, {"gt", (root / "gt.png").string()}}.dump() + "\n";
    atomic_write_text(root / "m.jsonl", manifest);
    REQUIRE(run("eval --manifest " + (root / "m.jsonl").string() + " --out " +
                (root / "out").string()) == 0);
    auto report = nlohmann::json::parse(read_text(root / "out" / "report.json"));
    // 0.6 quantizes to 153/255 and 0.5 to 128/255, so the diff is 25/255
    double diff = 25.0 / 255.0;
    double expected = (10.0 * std::log10(1.0 / (diff * diff)) + 100.0) / 2.0;
    CHECK(report["psnr"]["mean"].get<double>() == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("train-toy cli: zero steps writes the initialization, seeds reproduce") {
    auto root = test::temp_dir("cli_train");
    test::make_clean_fixture(root / "clean", 2, 32, 40, 91);
    REQUIRE(run("synth --clean-dir " + (root / "clean").string() + " --out " +
                (root / "data").string() + " --count 4 --seed 2 --height 32 --width 40") == 0);
    std::string manifest = (root / "data" / "manifest.jsonl").string();

    REQUIRE(run("train-toy --manifest " + manifest + " --out " + (root / "m0").string() +
                " --steps 0 --seed 6") == 0);
    ToyModel init = load_checkpoint(root / "m0" / "checkpoint.bin");
    ToyModel fresh;
    fresh.init(6);
    CHECK(init.params == fresh.params);

    std::string train = "train-toy --manifest " + manifest + " --steps 15 --seed 6 --out ";
    REQUIRE(run(train + (root / "m1").string()) == 0);
    REQUIRE(run(train + (root / "m2").string()) == 0);
    CHECK(read_text(root / "m1" / "loss_log.csv") == read_text(root / "m2" / "loss_log.csv"));
    CHECK(read_text(root / "m1" / "checkpoint.bin") == read_text(root / "m2" / "checkpoint.bin"));

    // learned desmoke from the checkpoint
    REQUIRE(run("desmoke --method learned --checkpoint " + (root / "m1" / "checkpoint.bin").string() +
                " --manifest " + manifest + " --out " + (root / "pred").string()) == 0);
    CHECK(std::filesystem::exists(root / "pred" / "pair_000000_J.png"));
    CHECK(std::filesystem::exists(root / "pred" / "pair_000000_S.png"));
}

TEST_CASE("eval scores externally supplied depth and masks") {
    auto root = test::temp_dir("cli_depth");
    Image img(16, 16, 0.5f);
    save_image(img, root / "img.png");
    // depth csv: gt 100mm, pred 104mm
    std::string gt_csv, pred_csv;
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            gt_csv += (x ? ",100" : "100");
            pred_csv += (x ? ",104" : "104");
        }
        gt_csv += "\n";
        pred_csv += "\n";
    }
    atomic_write_text(root / "gt.csv", gt_csv);
    atomic_write_text(root / "pred.csv", pred_csv);
    ScalarField mask(16, 16, 1.0f);
    save_field(mask, root / "mask.png");
    ScalarField half(16, 16, 0.0f);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 16; ++x) half.at(y, x) = 1.0f;
    save_field(half, root / "half.png");

    atomic_write_text(root / "m.jsonl",
                      nlohmann::json{{"id", "d"},
                                     {"pred", (root / "img.png").string()},
                                     {"gt", (root / "img.png").string()},
                                     {"depth_pred", (root / "pred.csv").string()},
                                     {"depth_gt", (root / "gt.csv").string()},
                                     {"depth_mask", (root / "mask.png").string()},
                                     {"mask_pred", (root / "half.png").string()},
                                     {"mask_gt", (root / "mask.png").string()}}
                              .dump() +
                          "\n");
    REQUIRE(run("eval --manifest " + (root / "m.jsonl").string() + " --out " +
                (root / "out").string()) == 0);
    auto report = nlohmann::json::parse(read_text(root / "out" / "report.json"));
    CHECK(report["mae_mm"]["mean"].get<double>() == doctest::Approx(4.0));
    CHECK(report["iou"]["mean"].get<double>() == doctest::Approx(0.5));
}
