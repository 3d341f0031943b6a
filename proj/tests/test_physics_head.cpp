#include <doctest.h>

#include "smokebench/physics_head.hpp"
#include "test_util.hpp"

using namespace smokebench;

TEST_CASE("head_forward identity and equivalence with the closed form") {
    Image i = test::make_clean_image(16, 20, 13);

    HeadOutput identity;
    identity.k = ScalarField(16, 20, 0.0f);
    identity.b = Field3(16, 20, 0.0f);
    identity.f[27] = 0.25;  // bias only, zero kernel
    auto [j, s] = head_forward(i, identity);
    CHECK(test::mean_abs_diff(j, i) == 0.0);
    for (float v : s.data) CHECK(v == doctest::Approx(0.25));

    // (K,B) from (t,A) reproduces the scattering inversion
    Rng rng(3);
    ScalarField t(16, 20);
    for (auto& v : t.data) v = float(rng.uniform(0.05, 1.0));
    AtmosphericLight a(0.8f, 0.85f, 0.9f);
    KBField kb = kb_from_t_a(t, a);
    HeadOutput derived;
    derived.k = kb.k;
    derived.b = kb.b;
    auto [j_head, s_head] = head_forward(i, derived);
    Image j_inv = invert_scattering(i, t, a);
    for (std::size_t p = 0; p < j_head.data.size(); ++p)
        CHECK(std::abs(j_head.data[p] - j_inv.data[p]) < 1e-6f);

    // averaging f on uniform airlight: S = B/(K+1) + bias in the interior
    HeadOutput avg;
    avg.k = ScalarField(16, 20, 1.0f);
    avg.b = Field3(16, 20, 0.8f);
    for (int w = 0; w < 27; ++w) avg.f[std::size_t(w)] = 1.0 / 27.0;
    avg.f[27] = 0.05;
    auto [j_avg, s_avg] = head_forward(i, avg);
    for (float v : s_avg.data) CHECK(v == doctest::Approx(0.45).epsilon(1e-6));

    HeadOutput bad;
    bad.k = ScalarField(16, 20, -1.5f);
    bad.b = Field3(16, 20, 0.0f);
    CHECK_THROWS_AS(head_forward(i, bad), DataError);
}

TEST_CASE("loss_l1 hand cases") {
    Image j = test::make_clean_image(12, 12, 4);
    ScalarField s(12, 12, 0.5f);
    CHECK(loss_l1(j, j, s, s, 0.1) == 0.0);

    Image j_off = j;
    for (auto& v : j_off.data) v += 0.2f;
    ScalarField s_off(12, 12, 0.6f);
    CHECK(loss_l1(j, j_off, s, s_off, 0.1) == doctest::Approx(0.21).epsilon(1e-6));
    CHECK(loss_l1(j, j_off, s, s_off, 0.0) == doctest::Approx(0.2).epsilon(1e-6));

    CHECK_THROWS_AS(loss_l1(j, Image(6, 6), s, s, 0.1), DataError);
    CHECK_THROWS_AS(loss_l1(j, j, s, s, -1.0), DataError);
}

TEST_CASE("loss_l1 is 1-Lipschitz in each prediction") {
    Image j = test::make_clean_image(12, 12, 8);
    ScalarField s(12, 12, 0.4f);
    Rng rng(5);
    Image j1 = j, j2 = j;
    for (std::size_t i = 0; i < j.data.size(); ++i) {
        j1.data[i] = float(rng.next_double());
        j2.data[i] = float(rng.next_double());
    }
    double lhs = std::abs(loss_l1(j, j1, s, s, 0.1) - loss_l1(j, j2, s, s, 0.1));
    CHECK(lhs <= test::mean_abs_diff(j1, j2) + 1e-12);
}

TEST_CASE("grad_check on a linear function is exact to rounding") {
    std::vector<double> coeffs{1.5, -2.0, 0.25, 3.0};
    auto value = [&](std::span<const double> x) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += coeffs[i] * x[i];
        return acc;
    };
    auto gradient = [&](std::span<const double>) { return coeffs; };
    CHECK(grad_check(value, gradient, {0.3, -0.7, 1.1, 0.0}, 1e-3) < 1e-10);
}

TEST_CASE("grad_check error on a quadratic scales as O(h^2)") {
    // f(x) = sum x_i^3 has curvature, so central differences err as h^2
    auto value = [](std::span<const double> x) {
        double acc = 0.0;
        for (double v : x) acc += v * v * v;
        return acc;
    };
    auto gradient = [](std::span<const double> x) {
        std::vector<double> g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = 3.0 * x[i] * x[i];
        return g;
    };
    std::vector<double> x{0.9, -1.2, 0.4};
    double e1 = grad_check(value, gradient, x, 1e-2);
    double e2 = grad_check(value, gradient, x, 5e-3);
    double ratio = e1 / e2;
    CHECK(ratio > 2.0);  // quartering +-50%
    CHECK(ratio < 6.0);
}

TEST_CASE("model gradients match central differences at smooth probes") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        GradCheckProbe p = make_gradcheck_probe(seed);
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
            return g;
        };
        CHECK(grad_check(value, gradient, p.model.params, 1e-3) < 1e-4);
    }
}

TEST_CASE("identity-biased initialization passes the input through") {
    ToyModel m;
    m.init(7);
    Image img = test::make_clean_image(24, 30, 17);
    auto [j, s] = desmoke_learned(m, img);
    CHECK(test::mean_abs_diff(j, img) < 0.05);

    // zero image in, finite bounded out
    auto [j0, s0] = desmoke_learned(m, Image(24, 30, 0.0f));
    for (float v : j0.data) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("training: zero lr freezes parameters, same seed reproduces") {
    auto clean_dir = test::temp_dir("train_clean");
    test::make_clean_fixture(clean_dir, 2, 32, 40, 44);
    auto data_dir = test::temp_dir("train_data");
    auto manifest = generate_dataset(clean_dir, 4, data_dir, 3, 32, 40);
    auto samples = load_training_set(manifest);

    TrainConfig frozen;
    frozen.steps = 20;
    frozen.lr_max = 0.0;
    frozen.lr_min = 0.0;
    frozen.weight_decay = 0.0;
    frozen.seed = 9;
    auto [m_frozen, log_frozen] = train_toy(samples, frozen);
    ToyModel reference;
    reference.init(9);
    CHECK(m_frozen.params == reference.params);

    TrainConfig cfg;
    cfg.steps = 30;
    cfg.seed = 10;
    auto [m1, log1] = train_toy(samples, cfg);
    auto [m2, log2] = train_toy(samples, cfg);
    CHECK(m1.params == m2.params);
    REQUIRE(log1.size() == log2.size());
    for (std::size_t i = 0; i < log1.size(); ++i)
        CHECK(log1[i].loss_total == log2[i].loss_total);

    CHECK_THROWS_AS(train_toy(std::vector<TrainSample>{}, cfg), DataError);
}

TEST_CASE("cosine schedule endpoints") {
    CHECK(cosine_lr(0, 100, 1e-3, 1e-5) == doctest::Approx(1e-3));
    CHECK(cosine_lr(99, 100, 1e-3, 1e-5) == doctest::Approx(1e-5));
    CHECK(cosine_lr(0, 1, 1e-3, 1e-5) == doctest::Approx(1e-3));
}

TEST_CASE("checkpoint round trip and error paths") {
    auto dir = test::temp_dir("ckpt");
    ToyModel m;
    m.c1 = 8;
    m.c2 = 12;
    m.init(21);
    save_checkpoint(m, dir / "model.bin");
    ToyModel back = load_checkpoint(dir / "model.bin");
    CHECK(back.c1 == 8);
    CHECK(back.c2 == 12);
    CHECK(back.params == m.params);

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), IoError);
    atomic_write_text(dir / "junk.bin", "definitely not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), DataError);
}
