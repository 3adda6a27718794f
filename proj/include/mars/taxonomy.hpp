#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mars/errors.hpp"

namespace mars {

// Closed six-member taxonomy of what a question asks for.
enum class QuestionType {
    factual,
    conceptual,
    calculation,
    application,
    analysis,
    comparison,
};

// Closed six-member taxonomy of how a failure happened. Every failure is
// assigned exactly one member.
enum class ErrorType {
    conceptual_misunderstanding,
    calculation_error,
    misreading,
    incomplete_analysis,
    wrong_elimination,
    knowledge_gap,
};

inline constexpr std::size_t kQuestionTypeCount = 6;
inline constexpr std::size_t kErrorTypeCount = 6;

std::array<QuestionType, kQuestionTypeCount> all_question_types();
std::array<ErrorType, kErrorTypeCount> all_error_types();

// Canonical lowercase, underscore-separated names. These strings are the wire
// form in every file format.
std::string_view question_type_name(QuestionType t);
std::string_view error_type_name(ErrorType t);

// Case-insensitive; surrounding whitespace ignored. Throws UnknownQuestionType.
QuestionType parse_question_type(std::string_view s);
// Case-insensitive; spaces and underscores interchangeable. Throws UnknownErrorType.
ErrorType parse_error_type(std::string_view s);

// One failed benchmark item, as handed to the analyzer.
struct FailureRecord {
    std::string question_id;
    std::string question_text;
    std::vector<std::string> options;  // empty for free-form answers
    std::string gold_answer;
    std::string predicted_answer;
    std::string reasoning_trace;  // may be empty
    std::string category;         // benchmark category label used for hybrid selection
};

// Structured diagnosis of one failure.
struct FailureAnalysis {
    std::string question_id;
    QuestionType question_type = QuestionType::factual;
    std::vector<std::string> topics;  // non-empty, each trimmed and non-empty
    ErrorType error_type = ErrorType::knowledge_gap;
    std::string root_cause;
    std::string specific_mistake;
    std::vector<std::string> requires_knowledge;
    std::vector<std::string> difficulty_factors;
};

// Composite grouping key: question type plus the set of the analysis's first
// two topics. Topic comparison is order-insensitive and case-sensitive.
class TypeTopicKey {
public:
    TypeTopicKey(QuestionType type, std::span<const std::string> topics);

    QuestionType question_type() const { return type_; }
    // Sorted, deduplicated; size 1 or 2.
    const std::vector<std::string>& topic_set() const { return topics_; }

    // "calculation|entropy,thermodynamics" — used for tie-breaking and files.
    std::string to_string() const;

    bool operator==(const TypeTopicKey& other) const = default;
    std::strong_ordering operator<=>(const TypeTopicKey& other) const = default;

private:
    QuestionType type_;
    std::vector<std::string> topics_;
};

// Throws EmptyTopics when the analysis has no topics.
TypeTopicKey make_key(const FailureAnalysis& analysis);

// A cluster of analyses sharing one type-topic key, together with the
// aggregated error profile.
struct TypeTopicGroup {
    TypeTopicKey key;
    std::vector<FailureAnalysis> analyses;          // non-empty
    std::set<ErrorType> error_types;                // deduplicated over analyses
    std::set<std::string> root_causes;              // exact-string dedup
    std::set<std::string> required_knowledge;       // union over analyses
    std::set<std::string> difficulty_factors;       // deduplicated union

    std::size_t size() const { return analyses.size(); }
};

// Per-group remediation payload produced by the synthesizer.
struct Enhancement {
    TypeTopicKey key;
    std::size_t num_questions = 0;  // |G_j|
    std::vector<std::string> key_warnings;
    std::vector<std::string> common_mistakes;
    std::vector<std::string> verification_steps;
    std::string type_specific_approach;
    std::string enhanced_prompt_addition;
};

enum class VariantKind {
    concise,
    reasoning,
    specific,  // concise + reasoning combined
};

inline constexpr std::array<VariantKind, 3> kAllVariants = {
    VariantKind::concise, VariantKind::reasoning, VariantKind::specific};

std::string_view variant_name(VariantKind kind);
VariantKind parse_variant(std::string_view s);  // throws UnknownVariantKind

// A base prompt with one rendered enhancement suffix attached.
struct EnhancedPrompt {
    std::string base_prompt;
    VariantKind variant = VariantKind::concise;
    std::string suffix;
    std::string full_text;  // base_prompt + blank line + suffix
};

EnhancedPrompt make_enhanced_prompt(std::string base, VariantKind kind, std::string suffix);

// One strategy x variant evaluation outcome for a single item.
struct RunRecord {
    std::string strategy;
    std::optional<VariantKind> variant;  // nullopt for un-enhanced baseline runs
    std::string question_id;
    std::string category;
    std::string raw_completion;
    std::string extracted_answer;
    double score = 0.0;  // in [0,1]; {0,1} for accuracy-scored items
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    double cost_usd = 0.0;
    std::string error;  // non-empty when the model call failed
};

} // namespace mars
