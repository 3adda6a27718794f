#include "mars/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "mars/allocation.hpp"
#include "mars/stats.hpp"
#include "mars/text.hpp"

namespace mars {

namespace {

void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

double mean_score(const std::vector<RunRecord>& records) {
    if (records.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : records) sum += r.score;
    return sum / static_cast<double>(records.size());
}

std::vector<DatasetItem> load_failed_file(const std::string& path) {
    try {
        return load_dataset(path, /*expect_predictions=*/true);
    } catch (const EmptyDataset&) {
        throw NoFailures("failed-question file is empty: " + path);
    }
}

std::vector<std::string> sorted_categories(const std::vector<DatasetItem>& items) {
    std::set<std::string> seen;
    for (const auto& item : items) seen.insert(item.category);
    return {seen.begin(), seen.end()};
}

} // namespace

void PipelineContext::initialize() {
    if (mock_script_path) {
        script_ = std::make_shared<MockScript>(MockScript::load_file(*mock_script_path));
        if (seed) script_->seed = *seed;
    }
    if (cache_dir) cache_ = std::make_shared<ResponseCache>(*cache_dir);
    limiter_ = std::make_shared<RateLimiter>(std::max(1, parallelism));
    if (seed) config.split.seed = *seed;
}

std::unique_ptr<ChatClient> PipelineContext::client_for(const ModelHandle& handle) const {
    ModelHandle effective = handle;
    if (backend_override) effective.backend = *backend_override;
    if (effective.backend == Backend::mock && !script_)
        throw ValidationError("mock backend selected but no --mock-script provided");
    std::unique_ptr<ChatClient> client = make_client(effective, ledger, limiter_, script_.get());
    if (cache_) client = std::make_unique<CachedClient>(std::move(client), cache_);
    return client;
}

StrategyConfig PipelineContext::strategy_config(const std::string& strategy) const {
    StrategyConfig cfg = config.strategy;
    cfg.kind = parse_strategy(strategy);
    return cfg;
}

SplitSpec PipelineContext::split_spec() const { return config.split; }

void PipelineContext::print_cost_report() const {
    *log << format_cost_report(estimate_cost(*ledger));
}

std::string sanitize_category(const std::string& category) {
    std::string out;
    out.reserve(category.size());
    for (char c : category) {
        auto uc = static_cast<unsigned char>(c);
        out += (std::isalnum(uc) || c == '.' || c == '_' || c == '-') ? c : '_';
    }
    return out.empty() ? std::string("uncategorized") : out;
}

std::string read_prompt_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open prompt file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    // Trailing-newline differences in prompt files must not change the
    // rendered full_text, so the tail is normalized away.
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
        text.pop_back();
    if (text.empty()) throw ValidationError("prompt file is empty: " + path);
    return text;
}

PromptTable load_prompt_table(const std::string& prompts_dir, const std::string& base_prompt,
                              const std::vector<std::string>& categories) {
    PromptTable table;
    for (const auto& category : categories) {
        for (VariantKind kind : kAllVariants) {
            const std::string path = prompts_dir + "/" + sanitize_category(category) + "_" +
                                     std::string(variant_name(kind)) + ".txt";
            std::ifstream in(path);
            if (!in) continue;
            std::ostringstream buffer;
            buffer << in.rdbuf();
            std::string full = buffer.str();
            while (!full.empty() && full.back() == '\n') full.pop_back();

            EnhancedPrompt prompt;
            prompt.base_prompt = base_prompt;
            prompt.variant = kind;
            prompt.full_text = full;
            const std::string joint = base_prompt + "\n\n";
            if (full.starts_with(joint)) prompt.suffix = full.substr(joint.size());
            table[category].emplace(kind, std::move(prompt));
        }
    }
    return table;
}

BaselineSummary cmd_run_baseline(PipelineContext& ctx, const std::string& dataset_path,
                                 const std::string& strategy, const std::string& base_prompt_path,
                                 const std::string& out_dir) {
    auto items = load_dataset(dataset_path);
    const std::string base = read_prompt_file(base_prompt_path);
    StrategyConfig cfg = ctx.strategy_config(strategy);
    auto client = ctx.client_for(ctx.config.evaluator);

    RunOptions options;
    options.parallelism = ctx.parallelism;
    auto records =
        run_strategy(cfg, items, [&](const DatasetItem&) { return base; }, *client, options);

    ensure_dir(out_dir);
    BaselineSummary summary;
    summary.total = items.size();
    summary.mean_score = mean_score(records);
    summary.results_path = out_dir + "/baseline_results.jsonl";
    summary.failed_path = out_dir + "/failed.jsonl";
    save_run_records(summary.results_path, records);

    std::vector<DatasetItem> failed;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (records[i].score >= 1.0) continue;
        DatasetItem item = items[i];
        item.predicted = records[i].extracted_answer;
        item.reasoning = records[i].raw_completion;
        failed.push_back(std::move(item));
    }
    summary.failed = failed.size();
    save_dataset(summary.failed_path, failed, /*with_predictions=*/true);

    char line[160];
    std::snprintf(line, sizeof(line),
                  "baseline (%s): %zu items, mean score %.4f, %zu failed\n", strategy.c_str(),
                  summary.total, summary.mean_score, summary.failed);
    *ctx.log << line;
    return summary;
}

DiagnoseSummary cmd_diagnose(PipelineContext& ctx, const std::string& failed_path,
                             const std::string& strategy, const std::string& out_dir) {
    auto failed = load_failed_file(failed_path);
    std::vector<FailureRecord> records;
    records.reserve(failed.size());
    for (const auto& item : failed) records.push_back(to_failure_record(item));

    auto client = ctx.client_for(ctx.config.analyzer);
    DiagnosisOptions options;
    options.parallelism = ctx.parallelism;
    DiagnosisResult result = diagnose_all(records, strategy, *client, options);

    ensure_dir(out_dir);
    DiagnoseSummary summary;
    summary.analyses = result.analyses.size();
    summary.skips = result.skips.size();
    summary.analyses_path = out_dir + "/analyses.jsonl";
    summary.skips_path = out_dir + "/diagnose_skips.jsonl";
    {
        std::ofstream out(summary.analyses_path);
        for (const auto& a : result.analyses) out << analysis_to_json(a).dump() << "\n";
    }
    {
        std::ofstream out(summary.skips_path);
        for (const auto& s : result.skips)
            out << nlohmann::json{{"question_id", s.question_id}, {"reason", s.reason}}.dump()
                << "\n";
    }
    *ctx.log << "diagnosed " << summary.analyses << " failures (" << summary.skips
             << " skipped)\n";
    return summary;
}

GroupSummary cmd_group(PipelineContext& ctx, const std::string& analyses_path,
                       const std::string& out_dir) {
    std::ifstream in(analyses_path);
    if (!in) throw ValidationError("cannot open analyses file: " + analyses_path);
    std::vector<FailureAnalysis> analyses;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        analyses.push_back(analysis_from_json(nlohmann::json::parse(line)));
    }

    auto groups = group_by_type_topic(analyses);
    ensure_dir(out_dir);
    GroupSummary summary;
    summary.groups = groups.size();
    summary.groups_path = out_dir + "/groups.jsonl";
    std::ofstream out(summary.groups_path);
    for (const auto& g : groups) out << group_to_json(g).dump() << "\n";
    *ctx.log << "grouped " << analyses.size() << " analyses into " << groups.size()
             << " type-topic groups\n";
    return summary;
}

SynthesizeSummary cmd_synthesize(PipelineContext& ctx, const std::string& groups_path,
                                 const std::string& out_dir) {
    std::ifstream in(groups_path);
    if (!in) throw ValidationError("cannot open groups file: " + groups_path);
    std::vector<TypeTopicGroup> groups;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        groups.push_back(group_from_json(nlohmann::json::parse(line)));
    }
    if (groups.empty()) throw EmptyInput("groups file has no records: " + groups_path);

    auto client = ctx.client_for(ctx.config.synthesizer);
    SynthesisOptions options;
    options.parallelism = ctx.parallelism;
    SynthesisResult result = synthesize_groups(groups, *client, options);

    ensure_dir(out_dir);
    SynthesizeSummary summary;
    summary.enhancements = result.enhancements.size();
    summary.skips = result.skips.size();
    summary.enhancements_path = out_dir + "/enhancements.jsonl";
    summary.skips_path = out_dir + "/synthesize_skips.jsonl";
    {
        std::ofstream out(summary.enhancements_path);
        for (const auto& e : result.enhancements) out << enhancement_to_json(e).dump() << "\n";
    }
    {
        std::ofstream out(summary.skips_path);
        for (const auto& s : result.skips)
            out << nlohmann::json{{"key", s.question_id}, {"reason", s.reason}}.dump() << "\n";
    }
    *ctx.log << "synthesized " << summary.enhancements << " enhancements (" << summary.skips
             << " groups skipped)\n";
    return summary;
}

namespace {

std::vector<Enhancement> load_enhancements(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open enhancements file: " + path);
    std::vector<Enhancement> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(enhancement_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

// Render every variant for every category and persist {category}_{variant}.txt.
std::vector<std::string> write_prompt_files(const std::string& base,
                                            const std::vector<Enhancement>& enhancements,
                                            const std::vector<std::string>& categories,
                                            const std::set<VariantKind>& kinds,
                                            const std::string& prompts_dir) {
    ensure_dir(prompts_dir);
    std::vector<std::string> paths;
    for (const auto& category : categories) {
        auto prompts = render_enhanced_prompts(base, enhancements, category, kinds);
        for (const auto& [kind, prompt] : prompts) {
            const std::string path = prompts_dir + "/" + sanitize_category(category) + "_" +
                                     std::string(variant_name(kind)) + ".txt";
            std::ofstream out(path);
            if (!out) throw ValidationError("cannot write prompt file: " + path);
            out << prompt.full_text << "\n";
            paths.push_back(path);
        }
    }
    return paths;
}

} // namespace

EnhanceSummary cmd_enhance(PipelineContext& ctx, const std::string& failed_path,
                           const std::string& strategy, const std::string& base_prompt_path,
                           const std::string& out_dir, const std::set<VariantKind>& kinds) {
    const std::string base = read_prompt_file(base_prompt_path);
    const int cycles = std::max(1, ctx.cycles);

    EnhanceSummary summary;
    std::string current_failed = failed_path;
    for (int cycle = 1; cycle <= cycles; ++cycle) {
        const std::string dir =
            cycle == 1 ? out_dir : out_dir + "/cycle" + std::to_string(cycle);
        ensure_dir(dir);

        auto diag = cmd_diagnose(ctx, current_failed, strategy, dir);
        auto grouped = cmd_group(ctx, diag.analyses_path, dir);
        auto synth = cmd_synthesize(ctx, grouped.groups_path, dir);

        auto enhancements = load_enhancements(synth.enhancements_path);
        auto failed_items = load_failed_file(current_failed);
        auto categories = sorted_categories(failed_items);
        summary.prompt_paths =
            write_prompt_files(base, enhancements, categories, kinds, dir + "/prompts");
        summary.cycles_run = static_cast<std::size_t>(cycle);

        if (cycle == cycles) break;

        // Iterative mode: re-evaluate the current failures under the cheapest
        // rendered variant and feed the residual into the next cycle.
        VariantKind redo_kind = *kinds.begin();
        PromptTable table = load_prompt_table(dir + "/prompts", base, categories);
        StrategyConfig cfg = ctx.strategy_config(strategy);
        auto client = ctx.client_for(ctx.config.evaluator);
        RunOptions options;
        options.parallelism = ctx.parallelism;
        options.variant = redo_kind;
        auto records = run_strategy(
            cfg, failed_items,
            [&](const DatasetItem& item) { return table.at(item.category).at(redo_kind).full_text; },
            *client, options);

        std::vector<DatasetItem> residual;
        for (std::size_t i = 0; i < failed_items.size(); ++i) {
            if (records[i].score >= 1.0) continue;
            DatasetItem item = failed_items[i];
            item.predicted = records[i].extracted_answer;
            item.reasoning = records[i].raw_completion;
            residual.push_back(std::move(item));
        }
        *ctx.log << "cycle " << cycle << ": " << residual.size() << " of " << failed_items.size()
                 << " failures remain\n";
        if (residual.empty()) break;

        const std::string next_dir = out_dir + "/cycle" + std::to_string(cycle + 1);
        ensure_dir(next_dir);
        const std::string residual_path = next_dir + "/failed.jsonl";
        save_dataset(residual_path, residual, /*with_predictions=*/true);
        current_failed = residual_path;
    }
    return summary;
}

HybridSummary cmd_hybrid(PipelineContext& ctx, const std::string& dataset_path,
                         const std::string& prompts_dir, const std::string& base_prompt_path,
                         const std::string& strategy, const std::string& out_dir) {
    auto items = load_dataset(dataset_path);
    const std::string base = read_prompt_file(base_prompt_path);
    auto split = split_dataset(items, ctx.split_spec());
    for (const auto& warning : split.warnings) *ctx.log << "warning: " << warning << "\n";
    if (split.val.empty()) throw ValidationError("validation split is empty; dataset too small");
    if (split.test.empty()) throw ValidationError("test split is empty; dataset too small");

    PromptTable table = load_prompt_table(prompts_dir, base, sorted_categories(items));
    if (table.empty())
        throw MissingPrompt("no {category}_{variant}.txt prompt files found in " + prompts_dir);

    StrategyConfig cfg = ctx.strategy_config(strategy);
    auto client = ctx.client_for(ctx.config.evaluator);

    AccuracyFn accuracy = [&](const EnhancedPrompt& prompt,
                              const std::vector<DatasetItem>& val_items) {
        RunOptions options;
        options.parallelism = ctx.parallelism;
        options.variant = prompt.variant;
        auto records = run_strategy(
            cfg, val_items, [&](const DatasetItem&) { return prompt.full_text; }, *client,
            options);
        return mean_score(records);
    };

    auto selection = select_hybrid(by_category(split.val), table, accuracy);
    *ctx.log << "Hybrid selection (validation split):\n";
    for (const auto& line : selection.log_lines) *ctx.log << line << "\n";
    for (const auto& warning : selection.warnings) *ctx.log << "warning: " << warning << "\n";

    ensure_dir(out_dir);
    HybridSummary summary;
    summary.policy = selection.policy;
    summary.policy_path = out_dir + "/policy.txt";
    {
        std::ofstream out(summary.policy_path);
        out << policy_to_text(selection.policy);
    }

    // Baseline on the test split.
    RunOptions base_options;
    base_options.parallelism = ctx.parallelism;
    auto baseline_records = run_strategy(
        cfg, split.test, [&](const DatasetItem&) { return base; }, *client, base_options);
    summary.baseline_score = mean_score(baseline_records);
    save_run_records(out_dir + "/test_baseline_results.jsonl", baseline_records);

    // Each variant applied across the whole test split (where rendered).
    for (VariantKind kind : kAllVariants) {
        std::vector<DatasetItem> covered;
        for (const auto& item : split.test) {
            auto cat = table.find(item.category);
            if (cat != table.end() && cat->second.contains(kind)) covered.push_back(item);
        }
        if (covered.empty()) continue;
        RunOptions options;
        options.parallelism = ctx.parallelism;
        options.variant = kind;
        auto records = run_strategy(
            cfg, covered,
            [&](const DatasetItem& item) { return table.at(item.category).at(kind).full_text; },
            *client, options);
        summary.variant_scores[kind] = mean_score(records);
        save_run_records(
            out_dir + "/test_" + std::string(variant_name(kind)) + "_results.jsonl", records);
    }

    // Hybrid: each test item under its category's selected variant. Validates
    // coverage up front, then runs variant-by-variant so records carry the
    // right tag.
    apply_policy(selection.policy, split.test, table);
    std::vector<RunRecord> hybrid_records;
    for (VariantKind kind : kAllVariants) {
        std::vector<DatasetItem> assigned;
        for (const auto& item : split.test) {
            if (selection.policy.variant_for(item.category) == kind) assigned.push_back(item);
        }
        if (assigned.empty()) continue;
        RunOptions options;
        options.parallelism = ctx.parallelism;
        options.variant = kind;
        auto records = run_strategy(
            cfg, assigned,
            [&](const DatasetItem& item) { return table.at(item.category).at(kind).full_text; },
            *client, options);
        hybrid_records.insert(hybrid_records.end(), records.begin(), records.end());
    }
    summary.hybrid_score = mean_score(hybrid_records);
    save_run_records(out_dir + "/hybrid_results.jsonl", hybrid_records);

    // Test report: aligned text and CSV, deltas against the baseline.
    summary.report_path = out_dir + "/test_report.txt";
    {
        std::ofstream out(summary.report_path);
        out << "Test-split results (strategy: " << strategy << ")\n";
        char line[160];
        std::snprintf(line, sizeof(line), "  %-10s %8.2f%%\n", "baseline",
                      summary.baseline_score * 100.0);
        out << line;
        for (const auto& [kind, score] : summary.variant_scores) {
            std::snprintf(line, sizeof(line), "  %-10s %8.2f%%  (%+.2f)\n",
                          std::string(variant_name(kind)).c_str(), score * 100.0,
                          (score - summary.baseline_score) * 100.0);
            out << line;
        }
        std::snprintf(line, sizeof(line), "  %-10s %8.2f%%  (%+.2f)\n", "hybrid",
                      summary.hybrid_score * 100.0,
                      (summary.hybrid_score - summary.baseline_score) * 100.0);
        out << line;
        out << "Selected variants (validation split):\n";
        for (const auto& log_line : selection.log_lines) out << log_line << "\n";
    }
    {
        std::ofstream csv(out_dir + "/test_report.csv");
        csv << "arm,score,delta_vs_baseline\n";
        csv << "baseline," << summary.baseline_score << ",0\n";
        for (const auto& [kind, score] : summary.variant_scores) {
            csv << variant_name(kind) << "," << score << ","
                << score - summary.baseline_score << "\n";
        }
        csv << "hybrid," << summary.hybrid_score << ","
            << summary.hybrid_score - summary.baseline_score << "\n";
    }
    *ctx.log << "hybrid test score: " << summary.hybrid_score * 100.0 << "% (baseline "
             << summary.baseline_score * 100.0 << "%)\n";
    return summary;
}

namespace {

struct Aggregate {
    std::size_t n = 0;
    double score_sum = 0.0;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    double cost = 0.0;

    void add(const RunRecord& r) {
        ++n;
        score_sum += r.score;
        prompt_tokens += r.prompt_tokens;
        completion_tokens += r.completion_tokens;
        cost += r.cost_usd;
    }
    double mean() const { return n == 0 ? 0.0 : score_sum / static_cast<double>(n); }
};

std::string variant_label(const std::optional<VariantKind>& variant) {
    return variant ? std::string(variant_name(*variant)) : std::string("-");
}

} // namespace

ReportSummary cmd_report(PipelineContext& ctx, const std::vector<std::string>& results_paths,
                         const std::string& out_dir) {
    std::vector<RunRecord> all;
    for (const auto& path : results_paths) {
        auto records = load_run_records(path);
        all.insert(all.end(), records.begin(), records.end());
    }
    if (all.empty()) throw InsufficientData("no run records found in the given results files");

    // (strategy, variant label) → aggregate; plus per-category for the gains.
    std::map<std::pair<std::string, std::string>, Aggregate> overall;
    std::map<std::tuple<std::string, std::string, std::string>, Aggregate> per_category;
    for (const auto& r : all) {
        overall[{r.strategy, variant_label(r.variant)}].add(r);
        per_category[{r.strategy, variant_label(r.variant), r.category}].add(r);
    }

    ReportSummary summary;
    for (const auto& [key, agg] : per_category) {
        const auto& [strategy, variant, category] = key;
        if (variant == "-") continue;
        auto base_it = per_category.find({strategy, "-", category});
        if (base_it == per_category.end()) continue;
        const double baseline = base_it->second.mean();
        if (baseline == 0.0) continue;  // relative gain undefined at a zero baseline
        GainPoint point;
        point.strategy = strategy;
        point.variant = parse_variant(variant);
        point.category = category;
        point.baseline_pct = baseline * 100.0;
        point.gain_pct = (agg.mean() - baseline) / baseline * 100.0;
        summary.points.push_back(std::move(point));
    }
    if (summary.points.size() < 2) {
        throw InsufficientData("need at least 2 (baseline, enhanced) pairs for the gain "
                               "statistics; found " +
                               std::to_string(summary.points.size()));
    }

    std::vector<double> baselines, gains;
    for (const auto& p : summary.points) {
        baselines.push_back(p.baseline_pct);
        gains.push_back(p.gain_pct);
    }
    summary.spearman_rho = spearman(baselines, gains);
    bool fit_ok = true;
    try {
        HyperbolicFit fit = fit_hyperbolic(baselines, gains);
        summary.fit_a = fit.a;
        summary.fit_b = fit.b;
        summary.fit_r_squared = fit.r_squared;
    } catch (const InsufficientData&) {
        fit_ok = false;  // all baselines equal; the table is still useful
    }

    ensure_dir(out_dir);
    summary.summary_path = out_dir + "/summary.txt";
    summary.csv_path = out_dir + "/summary.csv";
    {
        std::ofstream out(summary.summary_path);
        char line[200];
        out << "Results by strategy and variant\n";
        std::snprintf(line, sizeof(line), "%-18s %-10s %6s %9s %11s %11s %11s\n", "strategy",
                      "variant", "items", "score%", "prompt_tok", "compl_tok", "cost_usd");
        out << line;
        for (const auto& [key, agg] : overall) {
            std::snprintf(line, sizeof(line), "%-18s %-10s %6zu %8.2f%% %11lld %11lld %11.6f\n",
                          key.first.c_str(), key.second.c_str(), agg.n, agg.mean() * 100.0,
                          agg.prompt_tokens, agg.completion_tokens, agg.cost);
            out << line;
        }
        out << "\nRelative gains vs baseline (per category)\n";
        for (const auto& p : summary.points) {
            std::snprintf(line, sizeof(line), "  %-18s %-10s %-16s baseline %7.2f%%  gain %+8.2f%%\n",
                          p.strategy.c_str(), std::string(variant_name(p.variant)).c_str(),
                          p.category.c_str(), p.baseline_pct, p.gain_pct);
            out << line;
        }
        out << "\nGain statistics\n";
        if (std::isnan(summary.spearman_rho)) {
            out << "  Spearman rho: undefined (a series has zero rank variance)\n";
        } else {
            std::snprintf(line, sizeof(line), "  Spearman rho (baseline vs gain): %.6f\n",
                          summary.spearman_rho);
            out << line;
        }
        if (fit_ok) {
            std::snprintf(line, sizeof(line),
                          "  Hyperbolic fit gain = a/baseline + b: a=%.6f b=%.6f R^2=%.6f\n",
                          summary.fit_a, summary.fit_b, summary.fit_r_squared);
            out << line;
        } else {
            out << "  Hyperbolic fit: skipped (all baselines identical)\n";
        }
    }
    {
        std::ofstream csv(summary.csv_path);
        csv << "strategy,variant,items,score,prompt_tokens,completion_tokens,cost_usd\n";
        for (const auto& [key, agg] : overall) {
            csv << key.first << "," << key.second << "," << agg.n << "," << agg.mean() << ","
                << agg.prompt_tokens << "," << agg.completion_tokens << "," << agg.cost << "\n";
        }
    }
    *ctx.log << "report written to " << summary.summary_path << "\n";
    return summary;
}

} // namespace mars
