#pragma once

#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mars/cache.hpp"
#include "mars/config.hpp"
#include "mars/diagnosis.hpp"
#include "mars/gateway.hpp"
#include "mars/hybrid.hpp"
#include "mars/strategy.hpp"
#include "mars/synthesis.hpp"

namespace mars {

// Shared run state assembled from global CLI flags. Commands pull their
// role clients (and the optional cache decorator) from here.
struct PipelineContext {
    Config config;
    std::optional<Backend> backend_override;
    std::optional<std::string> mock_script_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> cache_dir;
    int parallelism = 1;
    int cycles = 1;
    std::ostream* log = &std::cout;

    std::shared_ptr<CostLedger> ledger = std::make_shared<CostLedger>();

    void initialize();  // loads the mock script, opens the cache
    std::unique_ptr<ChatClient> client_for(const ModelHandle& handle) const;
    StrategyConfig strategy_config(const std::string& strategy) const;
    SplitSpec split_spec() const;
    void print_cost_report() const;

private:
    std::shared_ptr<MockScript> script_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<RateLimiter> limiter_;
};

struct BaselineSummary {
    std::size_t total = 0;
    std::size_t failed = 0;
    double mean_score = 0.0;
    std::string results_path;
    std::string failed_path;
};

BaselineSummary cmd_run_baseline(PipelineContext& ctx, const std::string& dataset_path,
                                 const std::string& strategy, const std::string& base_prompt_path,
                                 const std::string& out_dir);

struct DiagnoseSummary {
    std::size_t analyses = 0;
    std::size_t skips = 0;
    std::string analyses_path;
    std::string skips_path;
};

DiagnoseSummary cmd_diagnose(PipelineContext& ctx, const std::string& failed_path,
                             const std::string& strategy, const std::string& out_dir);

struct GroupSummary {
    std::size_t groups = 0;
    std::string groups_path;
};

GroupSummary cmd_group(PipelineContext& ctx, const std::string& analyses_path,
                       const std::string& out_dir);

struct SynthesizeSummary {
    std::size_t enhancements = 0;
    std::size_t skips = 0;
    std::string enhancements_path;
    std::string skips_path;
};

SynthesizeSummary cmd_synthesize(PipelineContext& ctx, const std::string& groups_path,
                                 const std::string& out_dir);

struct EnhanceSummary {
    std::size_t cycles_run = 0;
    std::vector<std::string> prompt_paths;  // final-cycle prompt files
};

// Phases 1-3 composed; with cycles > 1, residual failures re-enter the loop
// and each extra cycle writes under out_dir/cycle<N>/.
EnhanceSummary cmd_enhance(PipelineContext& ctx, const std::string& failed_path,
                           const std::string& strategy, const std::string& base_prompt_path,
                           const std::string& out_dir,
                           const std::set<VariantKind>& kinds = {VariantKind::concise,
                                                                 VariantKind::reasoning,
                                                                 VariantKind::specific});

struct HybridSummary {
    HybridPolicy policy;
    double baseline_score = 0.0;
    std::map<VariantKind, double> variant_scores;  // whole-test-split application
    double hybrid_score = 0.0;
    std::string policy_path;
    std::string report_path;
};

HybridSummary cmd_hybrid(PipelineContext& ctx, const std::string& dataset_path,
                         const std::string& prompts_dir, const std::string& base_prompt_path,
                         const std::string& strategy, const std::string& out_dir);

struct GainPoint {
    std::string strategy;
    VariantKind variant = VariantKind::concise;
    std::string category;
    double baseline_pct = 0.0;
    double gain_pct = 0.0;
};

struct ReportSummary {
    std::vector<GainPoint> points;
    double spearman_rho = 0.0;
    double fit_a = 0.0;
    double fit_b = 0.0;
    double fit_r_squared = 0.0;
    std::string summary_path;
    std::string csv_path;
};

ReportSummary cmd_report(PipelineContext& ctx, const std::vector<std::string>& results_paths,
                         const std::string& out_dir);

// Shared helpers (exposed for tests).
std::string sanitize_category(const std::string& category);
std::string read_prompt_file(const std::string& path);
PromptTable load_prompt_table(const std::string& prompts_dir, const std::string& base_prompt,
                              const std::vector<std::string>& categories);

} // namespace mars
