// Command-line driver for the self-contrastive preference pipeline:
// sft -> generate-prefs -> rerank -> train -> eval, plus reporting,
// ablations and the gradient check.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hscr/ablation.hpp"
#include "hscr/gradcheck.hpp"
#include "hscr/pipeline.hpp"
#include "hscr/rng.hpp"
#include "hscr/vocab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hscr;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out_dir;
};

AppConfig resolve_config(const CommonArgs& args) {
    AppConfig config =
        args.config_path.empty() ? default_config() : load_config(args.config_path);
    if (args.seed) {
        config.seed = *args.seed;
        config.sft.seed = *args.seed;
    }
    config.gen.seed = config.seed;
    config.validate();
    return config;
}

void write_json(const fs::path& path, const json& j) {
    write_text_atomic(path.string(), j.dump(2) + "\n");
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const AppConfig& config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    write_json(out_dir / "manifest.json",
               json{{"command", command},
                    {"pipeline_version", kPipelineVersion},
                    {"config_hash", config_hash(config)},
                    {"config", config_to_json(config)},
                    {"inputs", inputs},
                    {"outputs", outputs}});
}

fs::path prepare_out(const CommonArgs& args, const std::string& command) {
    const fs::path dir =
        args.out_dir.empty() ? fs::path("out") / command : fs::path(args.out_dir);
    fs::create_directories(dir);
    return dir;
}

json eval_to_json(const EvalReport& report) {
    return json{{"closed_accuracy", report.closed_accuracy},
                {"open_recall", report.open_recall},
                {"closed_count", report.closed_count},
                {"open_count", report.open_count}};
}

json margin_to_json(const MarginReport& report) {
    return json{{"policy_margin_mean", report.policy_margin_mean},
                {"policy_margin_median", report.policy_margin_median},
                {"reward_margin_mean", report.reward_margin_mean},
                {"reward_margin_last_mean", report.reward_margin_last_mean},
                {"rank_order_fraction", report.rank_order_fraction},
                {"records", report.records.size()}};
}

json stats_to_json(const ProbabilityStats& s) {
    return json{{"bins", s.bins}, {"median", s.median}, {"mean", s.mean},
                {"count", s.count}};
}

json train_report_to_json(const TrainReport& report, const TrainConfig& config) {
    json epochs = json::array();
    for (const EpochStats& e : report.epochs)
        epochs.push_back({{"loss_total", e.loss_total},
                          {"loss_explicit", e.loss_explicit},
                          {"loss_implicit", e.loss_implicit},
                          {"margin_mean", e.margin_mean},
                          {"margin_last_mean", e.margin_last_mean},
                          {"margin_median", e.margin_median},
                          {"rank_order_fraction", e.rank_order_fraction}});
    return json{{"loss_mode", to_string(config.loss_mode)},
                {"gamma", config.gamma},
                {"learning_rate", config.learning_rate},
                {"epochs", epochs},
                {"wall_time_seconds", report.wall_time_seconds}};
}

json ablation_to_json(const AblationResult& result) {
    json arms = json::array();
    for (const ArmResult& arm : result.arms) {
        json runs = json::array();
        for (const ArmSeedRun& run : arm.runs)
            runs.push_back({{"seed", run.seed},
                            {"failed", run.failed},
                            {"error", run.error},
                            {"closed_accuracy", run.closed_accuracy},
                            {"open_recall", run.open_recall},
                            {"reward_margin_mean", run.reward_margin_mean},
                            {"rank_order_fraction", run.rank_order_fraction},
                            {"mean_abs_delta", run.mean_abs_delta},
                            {"trained_records", run.trained_records}});
        arms.push_back({{"arm", arm.arm},
                        {"failed", arm.failed},
                        {"closed_accuracy", arm.closed_accuracy},
                        {"open_recall", arm.open_recall},
                        {"reward_margin_mean", arm.reward_margin_mean},
                        {"rank_order_fraction", arm.rank_order_fraction},
                        {"mean_abs_delta", arm.mean_abs_delta},
                        {"runs", runs}});
    }
    return json{{"kind", to_string(result.kind)}, {"seeds", result.seeds}, {"arms", arms}};
}

// --- subcommand bodies -------------------------------------------------------

int cmd_sft(const CommonArgs& args) {
    const AppConfig config = resolve_config(args);
    const fs::path out = prepare_out(args, "sft");
    const auto corpus = make_corpus(config.train_corpus_spec());
    const SftResult result = pipeline_sft(config, corpus);
    save_checkpoint((out / "sft.ckpt").string(), result.model);
    write_json(out / "sft_report.json",
               json{{"records", corpus.size()},
                    {"epochs", config.sft.epochs},
                    {"loss_curve", result.loss_curve}});
    write_manifest(out, "sft", config, {},
                   {"sft.ckpt", "sft_report.json"});
    std::cout << "sft: " << corpus.size() << " records, final loss "
              << result.loss_curve.back() << "\n";
    return 0;
}

int cmd_generate(const CommonArgs& args, const std::string& model_path) {
    const AppConfig config = resolve_config(args);
    const fs::path out = prepare_out(args, "generate-prefs");
    const ModelParams reference = load_checkpoint(model_path);
    const auto corpus = make_corpus(config.train_corpus_spec());
    const GenOutput gen = pipeline_generate(config, reference, corpus);
    write_raw_dataset((out / "raw_prefs.jsonl").string(), gen.dataset);
    write_json(out / "gen_report.json",
               json{{"records", gen.stats.records},
                    {"failed", gen.stats.failed},
                    {"mean_abs_delta", gen.stats.mean_abs_delta}});
    write_manifest(out, "generate-prefs", config, {model_path},
                   {"raw_prefs.jsonl", "gen_report.json"});
    std::cout << "generate-prefs: " << gen.stats.records << " records, mean |delta| "
              << gen.stats.mean_abs_delta << "\n";
    return 0;
}

int cmd_rerank(const CommonArgs& args, const std::string& in_path) {
    const AppConfig config = resolve_config(args);
    const fs::path out = prepare_out(args, "rerank");
    const RawDataset raw = read_raw_dataset(in_path);
    const RerankOutput ranked = pipeline_rerank(config, raw);
    write_ranked_dataset((out / "ranked_prefs.jsonl").string(), ranked.dataset);
    write_json(out / "rerank_report.json",
               json{{"kept", ranked.dataset.records.size()},
                    {"dropped", ranked.dropped},
                    {"j", config.rerank_j},
                    {"gap", config.rerank_gap}});
    write_manifest(out, "rerank", config, {in_path},
                   {"ranked_prefs.jsonl", "rerank_report.json"});
    std::cout << "rerank: kept " << ranked.dataset.records.size() << ", dropped "
              << ranked.dropped << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& model_path,
              const std::string& data_path, const std::string& loss_mode_override) {
    AppConfig config = resolve_config(args);
    if (!loss_mode_override.empty())
        config.train.loss_mode = loss_mode_from_string(loss_mode_override);
    const fs::path out = prepare_out(args, "train");
    const ModelParams reference = load_checkpoint(model_path);
    const RankedDataset dataset = read_ranked_dataset(data_path);
    const TrainResult result = pipeline_train(config, reference, dataset);
    save_checkpoint((out / "policy.ckpt").string(), result.policy);
    write_json(out / "train_report.json",
               train_report_to_json(result.report, config.train));
    write_manifest(out, "train", config, {model_path, data_path},
                   {"policy.ckpt", "train_report.json"});
    std::cout << "train[" << to_string(config.train.loss_mode) << "]: "
              << dataset.records.size() << " records, final margin "
              << result.report.epochs.back().margin_mean << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& model_path,
             const std::string& ref_path, const std::string& data_path) {
    const AppConfig config = resolve_config(args);
    const fs::path out = prepare_out(args, "eval");
    const ModelParams policy = load_checkpoint(model_path);
    const auto heldout = make_corpus(config.heldout_corpus_spec());
    const EvalReport report = eval_accuracy(policy, heldout, config.corpus.noise_std);
    write_json(out / "eval_report.json", eval_to_json(report));
    std::vector<std::string> inputs{model_path};
    std::vector<std::string> outputs{"eval_report.json"};
    if (!ref_path.empty() && !data_path.empty()) {
        const ModelParams reference = load_checkpoint(ref_path);
        const RankedDataset dataset = read_ranked_dataset(data_path);
        const MarginReport margins =
            margin_report(policy, reference, dataset.records, config.train.gamma,
                          config.corpus.noise_std);
        write_json(out / "margin_report.json", margin_to_json(margins));
        inputs.push_back(ref_path);
        inputs.push_back(data_path);
        outputs.push_back("margin_report.json");
    }
    write_manifest(out, "eval", config, inputs, outputs);
    std::cout << "eval: closed " << report.closed_accuracy << ", open "
              << report.open_recall << "\n";
    return 0;
}

int cmd_report_sampling(const CommonArgs& args, const std::string& model_path,
                        const std::string& data_path, const std::string& external_path) {
    const AppConfig config = resolve_config(args);
    const fs::path out = prepare_out(args, "report-sampling");
    const ModelParams reference = load_checkpoint(model_path);
    const RawDataset dataset = read_raw_dataset(data_path);
    // Without a supplied external dataset, scrambled rejects stand in for
    // externally sourced preference data.
    RawDataset external = external_path.empty()
                              ? scramble_rejects(dataset, Rng::mix(config.seed, 0x5C7aULL))
                              : read_raw_dataset(external_path);
    const SamplingReport report = sampling_probability_report(
        reference, dataset, external, config.corpus.noise_std);
    json j{{"self_generated", stats_to_json(report.self_generated)},
           {"external_kind", external_path.empty() ? "scrambled" : "file"},
           {"external", stats_to_json(*report.external)}};
    write_json(out / "sampling_report.json", j);
    std::vector<std::string> inputs{model_path, data_path};
    if (!external_path.empty()) inputs.push_back(external_path);
    write_manifest(out, "report-sampling", config, inputs, {"sampling_report.json"});
    std::cout << "report-sampling: self median " << report.self_generated.median
              << ", external median " << report.external->median << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& kind_name) {
    const AppConfig config = resolve_config(args);
    const fs::path out = prepare_out(args, "ablate");
    const AblationKind kind = ablation_kind_from_string(kind_name);
    const AblationResult result = run_ablation(kind, config);
    write_json(out / "ablation.json", ablation_to_json(result));
    write_text_atomic((out / "ablation.txt").string(), result.text_table());
    write_manifest(out, "ablate", config, {}, {"ablation.json", "ablation.txt"});
    std::cout << result.text_table();
    for (const ArmResult& arm : result.arms)
        if (arm.failed) return 2;
    return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
    const AppConfig config = resolve_config(args);
    const fs::path out = prepare_out(args, "gradcheck");
    const ModelDims dims = config.gradcheck.dims;

    ModelParams policy = ModelParams::init(dims, Rng::mix(config.seed, 1), 0.25);
    const ModelParams reference = ModelParams::init(dims, Rng::mix(config.seed, 2), 0.25);
    policy.set_requires_grad(true);

    // Synthetic records over the reduced vocabulary.
    Rng rng(Rng::mix(config.seed, 0x67726164ULL));
    auto rand_tokens = [&](int64_t len) {
        std::vector<int32_t> t(static_cast<size_t>(len));
        for (auto& v : t)
            v = static_cast<int32_t>(vocab::kNumSpecials +
                                     rng.below(static_cast<uint64_t>(
                                         dims.vocab - vocab::kNumSpecials)));
        return t;
    };
    VisualInput visual;
    visual.features = Tensor::zeros({dims.visual_rows, dims.visual_dim});
    for (double& v : visual.features.data) v = rng.normal();

    PreferenceRecord record;
    record.prompt = rand_tokens(3);
    record.prompt[0] = vocab::BOS;
    record.chosen = rand_tokens(4);
    for (int i = 0; i < 3; ++i) {
        RankedCandidate rc;
        rc.tokens = rand_tokens(4);
        rc.similarity = 0.9 - 0.3 * i;
        rc.rank = i + 1;
        record.rejected.push_back(std::move(rc));
    }
    const ReferenceLogprobs refs = reference_logprobs(reference, visual, record);

    json modes = json::array();
    double worst = 0.0;
    bool all_passed = true;
    for (LossMode mode : {LossMode::dpo, LossMode::explicit_only,
                          LossMode::implicit_only, LossMode::hscr}) {
        auto builder = [&](Graph& g) {
            return build_record_loss(g, policy, refs, visual, record,
                                     config.train.gamma, mode)
                .total;
        };
        const GradCheckReport report = finite_diff_check(
            builder, policy.parameters(), config.gradcheck.step,
            config.gradcheck.tolerance);
        modes.push_back({{"mode", to_string(mode)},
                         {"max_rel_error", report.max_rel_error},
                         {"passed", report.passed}});
        worst = std::max(worst, report.max_rel_error);
        all_passed = all_passed && report.passed;
        std::cout << "gradcheck " << to_string(mode) << ": max rel error "
                  << report.max_rel_error << (report.passed ? " (pass)" : " (FAIL)")
                  << "\n";
    }
    write_json(out / "gradcheck_report.json",
               json{{"parameter_count", policy.parameter_count()},
                    {"step", config.gradcheck.step},
                    {"tolerance", config.gradcheck.tolerance},
                    {"max_rel_error", worst},
                    {"passed", all_passed},
                    {"modes", modes}});
    write_manifest(out, "gradcheck", config, {}, {"gradcheck_report.json"});
    return all_passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical self-contrastive rewarding pipeline"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string model_path, ref_path, data_path, external_path, loss_mode, kind;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON config file");
        sub->add_option("--seed", common.seed, "override the config seed");
        sub->add_option("--out", common.out_dir, "output directory");
    };

    CLI::App* sft = app.add_subcommand("sft", "train the reference model");
    add_common(sft);

    CLI::App* gen = app.add_subcommand("generate-prefs",
                                       "generate dispreferred candidates");
    add_common(gen);
    gen->add_option("--model", model_path, "reference checkpoint")->required();

    CLI::App* rer = app.add_subcommand("rerank", "similarity-aware re-ranking");
    add_common(rer);
    rer->add_option("--in", data_path, "raw candidate JSONL")->required();

    CLI::App* trn = app.add_subcommand("train", "multi-level preference optimization");
    add_common(trn);
    trn->add_option("--model", model_path, "reference checkpoint")->required();
    trn->add_option("--data", data_path, "ranked preference JSONL")->required();
    trn->add_option("--loss-mode", loss_mode, "hscr|explicit_only|implicit_only|dpo");

    CLI::App* evl = app.add_subcommand("eval", "held-out accuracy (and margins)");
    add_common(evl);
    evl->add_option("--model", model_path, "policy checkpoint")->required();
    evl->add_option("--ref", ref_path, "reference checkpoint (for margins)");
    evl->add_option("--data", data_path, "ranked preference JSONL (for margins)");

    CLI::App* rep = app.add_subcommand("report-sampling",
                                       "per-token probability histograms");
    add_common(rep);
    rep->add_option("--model", model_path, "reference checkpoint")->required();
    rep->add_option("--data", data_path, "raw candidate JSONL")->required();
    rep->add_option("--external", external_path, "external raw JSONL to compare");

    CLI::App* abl = app.add_subcommand("ablate", "run an ablation");
    add_common(abl);
    abl->add_option("--kind", kind, "mask_strategy|mask_ratio|loss_mode")->required();

    CLI::App* grd = app.add_subcommand("gradcheck", "finite-difference gradient check");
    add_common(grd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (sft->parsed()) return cmd_sft(common);
        if (gen->parsed()) return cmd_generate(common, model_path);
        if (rer->parsed()) return cmd_rerank(common, data_path);
        if (trn->parsed()) return cmd_train(common, model_path, data_path, loss_mode);
        if (evl->parsed()) return cmd_eval(common, model_path, ref_path, data_path);
        if (rep->parsed())
            return cmd_report_sampling(common, model_path, data_path, external_path);
        if (abl->parsed()) return cmd_ablate(common, kind);
        if (grd->parsed()) return cmd_gradcheck(common);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
