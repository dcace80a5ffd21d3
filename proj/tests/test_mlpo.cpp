#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hscr/corpus.hpp"
#include "hscr/gradcheck.hpp"
#include "hscr/mlpo.hpp"
#include "hscr/rng.hpp"
#include "hscr/vocab.hpp"

using namespace hscr;

namespace {

constexpr double kLn2 = 0.6931471805599453;

// Small dims keep the gradient checks fast and under 5,000 parameters.
ModelDims tiny_dims() {
    return ModelDims{.vocab = 16, .embed = 8, .visual_rows = 4, .visual_dim = 4,
                     .max_text = 12};
}

std::vector<int32_t> rand_tokens(Rng& rng, int64_t len, int64_t vocab) {
    std::vector<int32_t> t(static_cast<size_t>(len));
    for (auto& v : t)
        v = static_cast<int32_t>(vocab::kNumSpecials +
                                 rng.below(static_cast<uint64_t>(vocab - vocab::kNumSpecials)));
    return t;
}

struct Fixture {
    ModelParams reference;
    ModelParams policy;
    VisualInput visual;
    PreferenceRecord record;
};

Fixture make_fixture(uint64_t seed, int64_t k, const ModelDims& dims,
                     bool policy_equals_reference) {
    Rng rng(seed);
    Fixture f;
    f.reference = ModelParams::init(dims, Rng::mix(seed, 1), 0.2);
    f.policy = policy_equals_reference ? f.reference
                                       : ModelParams::init(dims, Rng::mix(seed, 2), 0.2);
    f.visual.features = Tensor::zeros({dims.visual_rows, dims.visual_dim});
    for (double& v : f.visual.features.data) v = rng.normal();
    f.record.id = static_cast<int64_t>(seed);
    f.record.prompt = rand_tokens(rng, 3, dims.vocab);
    f.record.prompt[0] = vocab::BOS;
    f.record.chosen = rand_tokens(rng, 4, dims.vocab);
    for (int64_t i = 0; i < k; ++i) {
        RankedCandidate rc;
        do {
            rc.tokens = rand_tokens(rng, 4, dims.vocab);
        } while ([&] {
            for (const auto& existing : f.record.rejected)
                if (existing.tokens == rc.tokens) return true;
            return rc.tokens == f.record.chosen;
        }());
        rc.similarity = 0.95 - 0.15 * static_cast<double>(i);
        rc.rank = static_cast<int32_t>(i + 1);
        f.record.rejected.push_back(std::move(rc));
    }
    return f;
}

}  // namespace

TEST_CASE("implicit_reward: zero at initialization, linear in gamma") {
    const Fixture f = make_fixture(100, 2, tiny_dims(), true);
    CHECK(implicit_reward(f.policy, f.reference, f.visual, f.record.prompt,
                          f.record.chosen, 0.1) == 0.0);
    const Fixture g = make_fixture(101, 2, tiny_dims(), false);
    const double r1 = implicit_reward(g.policy, g.reference, g.visual, g.record.prompt,
                                      g.record.chosen, 1.0);
    const double r3 = implicit_reward(g.policy, g.reference, g.visual, g.record.prompt,
                                      g.record.chosen, 3.0);
    CHECK(r3 == doctest::Approx(3.0 * r1).epsilon(1e-12));
}

TEST_CASE("implicit_reward: hand value ln(1.6) for probability ratio 0.8/0.5") {
    // gamma * (ln 0.8 - ln 0.5) = ln(1.6)
    const double reward = 1.0 * (std::log(0.8) - std::log(0.5));
    CHECK(reward == doctest::Approx(0.470004).epsilon(1e-6));
}

TEST_CASE("dpo_pair_loss: ln 2 at initialization") {
    const Fixture f = make_fixture(102, 1, tiny_dims(), true);
    const double loss =
        dpo_pair_loss(f.policy, f.reference, f.visual, f.record.prompt, f.record.chosen,
                      f.record.rejected[0].tokens, 0.1);
    CHECK(loss == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("dpo_pair_loss: hand value ln(9/8) for the 0.8/0.5 vs 0.1/0.5 example") {
    // gamma=1: argument = ln(0.8/0.5) - ln(0.1/0.5) = ln 8, loss = -log sigma(ln 8)
    const double arg = std::log(0.8 / 0.5) - std::log(0.1 / 0.5);
    CHECK(arg == doctest::Approx(std::log(8.0)).epsilon(1e-12));
    CHECK(-log_sigmoid(arg) == doctest::Approx(std::log(9.0 / 8.0)).epsilon(1e-12));
}

TEST_CASE("explicit_loss: k*ln2 at initialization; k=1 equals the pair loss") {
    const Fixture f3 = make_fixture(103, 3, tiny_dims(), true);
    CHECK(explicit_loss(f3.policy, f3.reference, f3.visual, f3.record, 0.1) ==
          doctest::Approx(3.0 * kLn2).epsilon(1e-12));

    Fixture f1 = make_fixture(104, 1, tiny_dims(), false);
    const double le = explicit_loss(f1.policy, f1.reference, f1.visual, f1.record, 0.1);
    const double pair =
        dpo_pair_loss(f1.policy, f1.reference, f1.visual, f1.record.prompt,
                      f1.record.chosen, f1.record.rejected[0].tokens, 0.1);
    CHECK(le == doctest::Approx(pair).epsilon(1e-12));
}

TEST_CASE("explicit_loss: matches a loop-of-pairs oracle") {
    const Fixture f = make_fixture(105, 3, tiny_dims(), false);
    double oracle = 0.0;
    for (const RankedCandidate& rc : f.record.rejected)
        oracle += dpo_pair_loss(f.policy, f.reference, f.visual, f.record.prompt,
                                f.record.chosen, rc.tokens, 0.1);
    CHECK(explicit_loss(f.policy, f.reference, f.visual, f.record, 0.1) ==
          doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("implicit_loss: C(k,2)*ln2 at initialization; k=2 equals one pair") {
    const Fixture f3 = make_fixture(106, 3, tiny_dims(), true);
    CHECK(implicit_loss(f3.policy, f3.reference, f3.visual, f3.record, 0.1) ==
          doctest::Approx(3.0 * kLn2).epsilon(1e-12));

    Fixture f2 = make_fixture(107, 2, tiny_dims(), false);
    const double li = implicit_loss(f2.policy, f2.reference, f2.visual, f2.record, 0.1);
    const double pair =
        dpo_pair_loss(f2.policy, f2.reference, f2.visual, f2.record.prompt,
                      f2.record.rejected[0].tokens, f2.record.rejected[1].tokens, 0.1);
    CHECK(li == doctest::Approx(pair).epsilon(1e-12));
}

TEST_CASE("implicit_loss: matches brute-force pair enumeration for k=4") {
    const Fixture f = make_fixture(108, 4, tiny_dims(), false);
    double oracle = 0.0;
    for (size_t i = 0; i < f.record.rejected.size(); ++i)
        for (size_t m = i + 1; m < f.record.rejected.size(); ++m)
            oracle += dpo_pair_loss(f.policy, f.reference, f.visual, f.record.prompt,
                                    f.record.rejected[i].tokens,
                                    f.record.rejected[m].tokens, 0.1);
    CHECK(implicit_loss(f.policy, f.reference, f.visual, f.record, 0.1) ==
          doctest::Approx(oracle).epsilon(1e-12));
    CHECK_THROWS_AS(
        implicit_loss(f.policy, f.reference, f.visual,
                      make_fixture(109, 1, tiny_dims(), false).record, 0.1),
        std::invalid_argument);
}

TEST_CASE("hscr_loss: sum identity, components, and the ablation contract") {
    const Fixture init = make_fixture(110, 3, tiny_dims(), true);
    const LossBreakdown b = hscr_loss(init.policy, init.reference, init.visual,
                                      init.record, 0.1);
    CHECK(b.total == doctest::Approx(6.0 * kLn2).epsilon(1e-12));

    const Fixture f = make_fixture(111, 3, tiny_dims(), false);
    const LossBreakdown parts = hscr_loss(f.policy, f.reference, f.visual, f.record, 0.1);
    const double le = explicit_loss(f.policy, f.reference, f.visual, f.record, 0.1);
    const double li = implicit_loss(f.policy, f.reference, f.visual, f.record, 0.1);
    CHECK(parts.total == doctest::Approx(le + li).epsilon(1e-12));
    CHECK(parts.explicit_part == doctest::Approx(le).epsilon(1e-12));
    CHECK(parts.implicit_part == doctest::Approx(li).epsilon(1e-12));
}

TEST_CASE("hscr gradient equals grad(L_E) + grad(L_I) elementwise") {
    Fixture f = make_fixture(112, 3, tiny_dims(), false);
    f.policy.set_requires_grad(true);
    const ReferenceLogprobs refs = reference_logprobs(f.reference, f.visual, f.record);

    auto grads_for = [&](LossMode mode) {
        f.policy.zero_grads();
        Graph g;
        g.backward(
            build_record_loss(g, f.policy, refs, f.visual, f.record, 0.1, mode).total);
        std::vector<double> flat;
        for (Tensor* p : f.policy.parameters())
            flat.insert(flat.end(), p->grad.begin(), p->grad.end());
        return flat;
    };
    const auto ge = grads_for(LossMode::explicit_only);
    const auto gi = grads_for(LossMode::implicit_only);
    const auto gh = grads_for(LossMode::hscr);
    REQUIRE(ge.size() == gh.size());
    for (size_t i = 0; i < gh.size(); ++i)
        CHECK(gh[i] == doctest::Approx(ge[i] + gi[i]).epsilon(1e-12));
}

TEST_CASE("pairwise anti-symmetry: l(a) + l(-a) >= 2 ln2, equality iff a = 0") {
    for (double a : {-4.0, -1.0, -0.1, 0.0, 0.3, 2.5}) {
        const double sum = -log_sigmoid(a) - log_sigmoid(-a);
        CHECK(sum >= 2.0 * kLn2 - 1e-15);
        if (a == 0.0) CHECK(sum == doctest::Approx(2.0 * kLn2).epsilon(1e-15));
        if (std::abs(a) > 0.05) CHECK(sum > 2.0 * kLn2);
    }
}

TEST_CASE("gamma scaling preserves the sign of every pairwise preference") {
    const Fixture f = make_fixture(113, 3, tiny_dims(), false);
    for (size_t i = 0; i < f.record.rejected.size(); ++i) {
        const double r1 = implicit_reward(f.policy, f.reference, f.visual, f.record.prompt,
                                          f.record.rejected[i].tokens, 0.1);
        const double r2 = implicit_reward(f.policy, f.reference, f.visual, f.record.prompt,
                                          f.record.rejected[i].tokens, 0.7);
        CHECK((r1 > 0) == (r2 > 0));
    }
}

TEST_CASE("all four loss modes pass central finite differences at 1e-4") {
    Fixture f = make_fixture(114, 3, tiny_dims(), false);
    f.policy.set_requires_grad(true);
    CHECK(f.policy.parameter_count() <= 5000);
    const ReferenceLogprobs refs = reference_logprobs(f.reference, f.visual, f.record);
    for (LossMode mode : {LossMode::dpo, LossMode::explicit_only, LossMode::implicit_only,
                          LossMode::hscr}) {
        auto builder = [&](Graph& g) {
            return build_record_loss(g, f.policy, refs, f.visual, f.record, 0.1, mode)
                .total;
        };
        const GradCheckReport report =
            finite_diff_check(builder, f.policy.parameters(), 1e-5, 1e-4);
        INFO("mode ", to_string(mode), " max rel err ", report.max_rel_error);
        CHECK(report.passed);
    }
}

TEST_CASE("train: zero epochs is rejected; reference stays frozen; determinism") {
    const ModelDims dims = tiny_dims();
    std::vector<PreferenceRecord> dataset;
    for (int i = 0; i < 6; ++i) {
        Fixture f = make_fixture(200 + static_cast<uint64_t>(i), 2, dims, false);
        f.record.id = i;
        f.record.scene = Scene{{1, 2, 3, 4}};
        f.record.visual_seed = 50 + static_cast<uint64_t>(i);
        dataset.push_back(f.record);
    }
    const ModelParams reference = ModelParams::init(dims, 999, 0.15);
    const ModelParams ref_snapshot = reference;

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 3;
    cfg.learning_rate = 1e-3;
    cfg.seed = 5;

    TrainConfig bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS_AS(train(reference, reference, dataset, bad), std::invalid_argument);

    const TrainResult a = train(reference, reference, dataset, cfg);
    const TrainResult b = train(reference, reference, dataset, cfg);
    CHECK(a.policy.equals_bitwise(b.policy));
    CHECK(reference.equals_bitwise(ref_snapshot));
    CHECK(a.report.epochs.size() == 2);
    CHECK(!a.policy.equals_bitwise(reference));

    // dpo mode consumes only the top-ranked rejected candidate: shrinking the
    // list to rank 1 must reproduce the same trained policy bitwise
    TrainConfig dpo_cfg = cfg;
    dpo_cfg.loss_mode = LossMode::dpo;
    std::vector<PreferenceRecord> top1 = dataset;
    for (auto& r : top1) r.rejected.resize(1);
    const TrainResult dpo_full = train(reference, reference, dataset, dpo_cfg);
    const TrainResult dpo_top1 = train(reference, reference, top1, dpo_cfg);
    CHECK(dpo_full.policy.equals_bitwise(dpo_top1.policy));
}

TEST_CASE("margin_report: zero margins at initialization; median via sorting oracle") {
    const ModelDims dims = tiny_dims();
    std::vector<PreferenceRecord> dataset;
    for (int i = 0; i < 5; ++i) {
        Fixture f = make_fixture(300 + static_cast<uint64_t>(i), 2, dims, true);
        f.record.id = i;
        f.record.scene = Scene{{0, 1, 2, 3}};
        f.record.visual_seed = 70 + static_cast<uint64_t>(i);
        dataset.push_back(f.record);
    }
    const ModelParams reference = ModelParams::init(dims, 1234, 0.15);
    const MarginReport report = margin_report(reference, reference, dataset, 0.1, 0.05);
    CHECK(report.reward_margin_mean == 0.0);
    CHECK(report.rank_order_fraction == 0.0);  // strict ordering fails at equality

    std::vector<double> margins;
    for (const RecordMargins& r : report.records) margins.push_back(r.policy_margin);
    std::sort(margins.begin(), margins.end());
    CHECK(report.policy_margin_median == doctest::Approx(margins[2]).epsilon(1e-12));
}
