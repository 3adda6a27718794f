#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mars/pipeline.hpp"

namespace {

// Exit codes: 0 success, 1 invalid input/config, 2 provider gave out after
// retries.
constexpr int kExitValidation = 1;
constexpr int kExitProvider = 2;

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mars - failure-driven prompt optimization pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string backend;
    std::string mock_script;
    std::string cache_dir;
    std::uint64_t seed = 0;
    int parallelism = 1;
    int cycles = 1;

    app.add_option("--config", config_path, "JSON config file (model roles, strategy, split)");
    app.add_option("--backend", backend, "override the backend for every model role")
        ->check(CLI::IsMember({"http", "mock"}));
    app.add_option("--mock-script", mock_script, "scripted completions for the mock backend");
    auto* seed_opt = app.add_option("--seed", seed, "split/sampling seed override");
    app.add_option("--cache-dir", cache_dir, "response cache directory (enables caching)");
    app.add_option("--parallelism", parallelism, "concurrent in-flight model calls")
        ->check(CLI::PositiveNumber);
    app.add_option("--cycles", cycles, "self-improvement cycles for `enhance`")
        ->check(CLI::PositiveNumber);

    auto make_context = [&]() {
        mars::PipelineContext ctx;
        ctx.config = mars::load_config(
            config_path.empty() ? std::nullopt : std::optional<std::string>(config_path));
        if (!backend.empty()) ctx.backend_override = mars::parse_backend(backend);
        if (!mock_script.empty()) ctx.mock_script_path = mock_script;
        if (seed_opt->count() > 0) ctx.seed = seed;
        if (!cache_dir.empty()) ctx.cache_dir = cache_dir;
        ctx.parallelism = parallelism;
        ctx.cycles = cycles;
        ctx.initialize();
        return ctx;
    };

    // run-baseline
    {
        auto* sub = app.add_subcommand("run-baseline",
                                       "evaluate a strategy and collect the failed questions");
        auto dataset = std::make_shared<std::string>();
        auto strategy = std::make_shared<std::string>("zero_shot");
        auto base_prompt = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--dataset", *dataset, "benchmark JSONL")->required();
        sub->add_option("--strategy", *strategy, "prompting strategy");
        sub->add_option("--base-prompt", *base_prompt, "base prompt text file")->required();
        sub->add_option("--out", *out, "output directory")->required();
        sub->callback([=, &make_context]() {
            auto ctx = make_context();
            mars::cmd_run_baseline(ctx, *dataset, *strategy, *base_prompt, *out);
            ctx.print_cost_report();
        });
    }

    // diagnose
    {
        auto* sub = app.add_subcommand("diagnose", "analyze failed questions with the analyzer model");
        auto failed = std::make_shared<std::string>();
        auto strategy = std::make_shared<std::string>("zero_shot");
        auto out = std::make_shared<std::string>();
        sub->add_option("--failed", *failed, "failed questions JSONL (with predictions)")
            ->required();
        sub->add_option("--strategy", *strategy, "strategy name recorded in the analysis prompt");
        sub->add_option("--out", *out, "output directory")->required();
        sub->callback([=, &make_context]() {
            auto ctx = make_context();
            mars::cmd_diagnose(ctx, *failed, *strategy, *out);
            ctx.print_cost_report();
        });
    }

    // group
    {
        auto* sub = app.add_subcommand("group", "partition analyses into type-topic groups");
        auto analyses = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--analyses", *analyses, "analyses JSONL from `diagnose`")->required();
        sub->add_option("--out", *out, "output directory")->required();
        sub->callback([=, &make_context]() {
            auto ctx = make_context();
            mars::cmd_group(ctx, *analyses, *out);
        });
    }

    // synthesize
    {
        auto* sub = app.add_subcommand("synthesize", "turn each group into prompt guidance");
        auto groups = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--groups", *groups, "groups JSONL from `group`")->required();
        sub->add_option("--out", *out, "output directory")->required();
        sub->callback([=, &make_context]() {
            auto ctx = make_context();
            mars::cmd_synthesize(ctx, *groups, *out);
            ctx.print_cost_report();
        });
    }

    // enhance
    {
        auto* sub = app.add_subcommand(
            "enhance", "diagnose + group + synthesize + render enhanced prompts");
        auto failed = std::make_shared<std::string>();
        auto strategy = std::make_shared<std::string>("zero_shot");
        auto base_prompt = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto variants = std::make_shared<std::vector<std::string>>();
        sub->add_option("--failed", *failed, "failed questions JSONL (with predictions)")
            ->required();
        sub->add_option("--strategy", *strategy, "prompting strategy");
        sub->add_option("--base-prompt", *base_prompt, "base prompt text file")->required();
        sub->add_option("--out", *out, "output directory")->required();
        sub->add_option("--variants", *variants,
                        "subset of {concise,reasoning,specific} to render")
            ->delimiter(',');
        sub->callback([=, &make_context]() {
            auto ctx = make_context();
            std::set<mars::VariantKind> kinds;
            for (const auto& name : *variants) kinds.insert(mars::parse_variant(name));
            if (kinds.empty())
                kinds = {mars::VariantKind::concise, mars::VariantKind::reasoning,
                         mars::VariantKind::specific};
            mars::cmd_enhance(ctx, *failed, *strategy, *base_prompt, *out, kinds);
            ctx.print_cost_report();
        });
    }

    // hybrid
    {
        auto* sub = app.add_subcommand(
            "hybrid", "pick the best variant per category and score the test split");
        auto dataset = std::make_shared<std::string>();
        auto prompts = std::make_shared<std::string>();
        auto base_prompt = std::make_shared<std::string>();
        auto strategy = std::make_shared<std::string>("zero_shot");
        auto out = std::make_shared<std::string>();
        sub->add_option("--dataset", *dataset, "benchmark JSONL (will be split)")->required();
        sub->add_option("--prompts", *prompts, "directory of {category}_{variant}.txt files")
            ->required();
        sub->add_option("--base-prompt", *base_prompt, "base prompt text file")->required();
        sub->add_option("--strategy", *strategy, "prompting strategy");
        sub->add_option("--out", *out, "output directory")->required();
        sub->callback([=, &make_context]() {
            auto ctx = make_context();
            mars::cmd_hybrid(ctx, *dataset, *prompts, *base_prompt, *strategy, *out);
            ctx.print_cost_report();
        });
    }

    // report
    {
        auto* sub = app.add_subcommand("report", "aggregate run records and gain statistics");
        auto results = std::make_shared<std::vector<std::string>>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--results", *results, "one or more run-record JSONL files")
            ->required()
            ->expected(-1);
        sub->add_option("--out", *out, "output directory")->required();
        sub->callback([=, &make_context]() {
            auto ctx = make_context();
            mars::cmd_report(ctx, *results, *out);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    } catch (const mars::ProviderExhausted& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const mars::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
