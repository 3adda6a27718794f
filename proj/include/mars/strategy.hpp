#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mars/dataset.hpp"
#include "mars/gateway.hpp"
#include "mars/taxonomy.hpp"

namespace mars {

enum class StrategyKind {
    zero_shot,
    zero_shot_cot,
    few_shot_cot,
    self_refine,
    self_consistency,
};

std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view s);  // throws UnknownStrategy

enum class ScoreMode { accuracy, token_f1 };
std::string_view score_mode_name(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view s);  // throws ValidationError

// A worked example for few-shot prompting.
struct Demonstration {
    std::string question;
    std::string reasoning;
    std::string answer;
};

struct StrategyConfig {
    StrategyKind kind = StrategyKind::zero_shot;
    double temperature = 0.0;
    int max_tokens = 3000;
    int sc_samples = 5;          // self_consistency draws
    double sc_temperature = 0.7;  // self_consistency sampling temperature
    int refine_rounds = 1;        // critique+revise cycles
    std::vector<Demonstration> demonstrations;  // empty → one built-in example
    ScoreMode score_mode = ScoreMode::accuracy;
};

// The initial prompt for any strategy. self_refine and self_consistency
// render the plain zero-shot template here; their extra calls use the
// critique/revise templates below.
std::string render_strategy_prompt(const StrategyConfig& config, const DatasetItem& item,
                                   const std::string& prompt_base);
std::string render_critique_prompt(const DatasetItem& item, const std::string& prompt_base,
                                   const std::string& prior_solution);
std::string render_revise_prompt(const DatasetItem& item, const std::string& prompt_base,
                                 const std::string& prior_solution, const std::string& critique);

// Content of the last well-formed <answer>...</answer> pair, trimmed; falls
// back to the last non-empty line with lead-in stripping and numeric
// normalization. Throws EmptyCompletion on blank input.
std::string extract_answer(const std::string& completion);
// Same, then normalizes multiple-choice letters against `options`.
std::string extract_answer(const std::string& completion, const std::vector<std::string>& options);

// Most frequent answer (whitespace/case-normalized classes); ties go to the
// class occurring earliest. Returns the winning class's first original form.
std::string majority_vote(const std::vector<std::string>& answers);

double score_accuracy(const std::string& extracted, const std::string& gold,
                      const std::vector<std::string>& options);
double score_token_f1(const std::string& pred, const std::string& gold);
double score_item(const StrategyConfig& config, const std::string& extracted,
                  const DatasetItem& item);

struct RunOptions {
    int parallelism = 1;
    std::optional<VariantKind> variant;  // stamped onto every record
};

// Per-item prompt lookup; hybrid application feeds different prompts per
// category through this.
using PromptFor = std::function<std::string(const DatasetItem&)>;

// One RunRecord per item, input order. Per-item model errors are recorded
// (score 0, error set) and the run continues; if every item fails and at
// least one failure was provider exhaustion, that exhaustion is rethrown.
std::vector<RunRecord> run_strategy(const StrategyConfig& config,
                                    const std::vector<DatasetItem>& items,
                                    const PromptFor& prompt_for, ChatClient& client,
                                    const RunOptions& options = {});

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

std::vector<RunRecord> load_run_records(const std::string& path);
void save_run_records(const std::string& path, const std::vector<RunRecord>& records);

} // namespace mars
