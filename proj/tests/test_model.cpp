#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sparknet/model.hpp"
#include "support/checks.hpp"

using namespace sparknet;

namespace {
SparkNetParams make(int channels, std::uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.channels = channels;
    return build(cfg, seed);
}
}  // namespace

TEST_CASE("trainable parameter count follows the closed form") {
    // With F=32, 12 classes and the fixed kernel set, the total is
    // 6C^2 + 141C + 844 for any channel width C.
    for (int c : {4, 8, 16, 32, 24, 64}) {
        auto p = make(c);
        REQUIRE(p.count_trainable() ==
                static_cast<size_t>(6 * c * c + 141 * c + 844));
    }
}

TEST_CASE("published widths hit their exact totals") {
    REQUIRE(make(16).count_trainable() == 4636);
    REQUIRE(make(32).count_trainable() == 11500);
}

TEST_CASE("block structure: first block takes features, later blocks have skips") {
    auto p = make(16);
    REQUIRE(p.blocks[0].in_ch == 32);
    REQUIRE_FALSE(p.blocks[0].has_residual);
    for (int i = 1; i < 4; ++i) {
        REQUIRE(p.blocks[i].in_ch == 16);
        REQUIRE(p.blocks[i].has_residual);
    }
    REQUIRE(p.blocks[0].kernel == 11);
    REQUIRE(p.blocks[3].kernel == 29);
    REQUIRE(p.head_b.size() == 32);       // only conv bias in the network
    REQUIRE(p.fc_w.size() == 12 * 32);
}

TEST_CASE("initialization is seeded and bounded") {
    auto a = make(16, 7), b = make(16, 7), c = make(16, 8);
    REQUIRE(a.blocks[0].dw.value == b.blocks[0].dw.value);
    REQUIRE(a.fc_w.value == b.fc_w.value);
    REQUIRE(a.blocks[0].dw.value != c.blocks[0].dw.value);

    double bound = std::sqrt(6.0 / a.blocks[0].kernel);
    for (double v : a.blocks[0].dw.value) REQUIRE(std::fabs(v) <= bound);
    for (double v : a.head_b.value) REQUIRE(v == 0.0);
    for (double v : a.fc_b.value) REQUIRE(v == 0.0);
}

TEST_CASE("forward output shapes and ranges") {
    auto p = make(16);
    Rng rng(11);
    std::vector<Tensor2> feats{testsupport::random_tensor(32, 98, rng)};
    ForwardResult out = forward(feats, p, /*train=*/false);
    REQUIRE(out.logits.size() == 1);
    REQUIRE(out.logits[0].size() == 12);
    REQUIRE(out.mu[0].channels == 32);
    REQUIRE(out.mu[0].time == 98);
    for (double m : out.mu[0].data) {
        REQUIRE(m >= -1.0);
        REQUIRE(m <= 1.0);
    }
    for (double z : out.z[0].data) {
        REQUIRE(z >= 0.0);
        REQUIRE(z <= 1.0);
    }
}

TEST_CASE("eval forward is deterministic and batch-invariant") {
    auto p = make(8);
    Rng rng(13);
    std::vector<Tensor2> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(testsupport::random_tensor(32, 40, rng));

    ForwardResult joint = forward(batch, p, false);
    for (int i = 0; i < 3; ++i) {
        std::vector<Tensor2> single{batch[i]};
        ForwardResult solo = forward(single, p, false);
        for (int k = 0; k < 12; ++k)
            REQUIRE(solo.logits[0][k] == Catch::Approx(joint.logits[i][k]).margin(1e-12));
    }
    ForwardResult again = forward(batch, p, false);
    REQUIRE(again.logits == joint.logits);
}

TEST_CASE("full model gradients match finite differences") {
    auto res = testsupport::check_full_model_grad(21);
    REQUIRE(res.n_params > 0);
    REQUIRE(res.max_rel_err < 1e-3);
}

TEST_CASE("mac counter: analytic totals") {
    ModelConfig cfg;  // C=16, F=32
    MacReport r = count_macs(cfg, 98);
    REQUIRE(r.total == 384544);
    REQUIRE(r.extended > r.total);

    // conv part is linear in T; the classifier term (384) is frame-free
    MacReport r1 = count_macs(cfg, 1);
    long long per_frame = r1.total - 384;
    REQUIRE(per_frame == 3920);
    REQUIRE(count_macs(cfg, 196).total - 384 == 2 * (r.total - 384));
}

TEST_CASE("mac counter agrees with the instrumented multiply count") {
    for (int c : {4, 8, 16, 32}) {
        ModelConfig cfg;
        cfg.channels = c;
        SparkNetParams p = build(cfg, 3);
        // run once first so BN has sane running stats, then count
        Rng rng(c);
        Tensor2 feats = testsupport::random_tensor(32, 98, rng);
        long long measured = instrumented_multiply_count(feats, p);
        REQUIRE(measured == count_macs(cfg, 98).total);
    }
}
