#include "mars/taxonomy.hpp"

#include <algorithm>

#include "mars/text.hpp"

namespace mars {

std::array<QuestionType, kQuestionTypeCount> all_question_types() {
    return {QuestionType::factual,     QuestionType::conceptual, QuestionType::calculation,
            QuestionType::application, QuestionType::analysis,   QuestionType::comparison};
}

std::array<ErrorType, kErrorTypeCount> all_error_types() {
    return {ErrorType::conceptual_misunderstanding,
            ErrorType::calculation_error,
            ErrorType::misreading,
            ErrorType::incomplete_analysis,
            ErrorType::wrong_elimination,
            ErrorType::knowledge_gap};
}

std::string_view question_type_name(QuestionType t) {
    switch (t) {
        case QuestionType::factual: return "factual";
        case QuestionType::conceptual: return "conceptual";
        case QuestionType::calculation: return "calculation";
        case QuestionType::application: return "application";
        case QuestionType::analysis: return "analysis";
        case QuestionType::comparison: return "comparison";
    }
    return "factual";
}

std::string_view error_type_name(ErrorType t) {
    switch (t) {
        case ErrorType::conceptual_misunderstanding: return "conceptual_misunderstanding";
        case ErrorType::calculation_error: return "calculation_error";
        case ErrorType::misreading: return "misreading";
        case ErrorType::incomplete_analysis: return "incomplete_analysis";
        case ErrorType::wrong_elimination: return "wrong_elimination";
        case ErrorType::knowledge_gap: return "knowledge_gap";
    }
    return "knowledge_gap";
}

QuestionType parse_question_type(std::string_view s) {
    const std::string needle = to_lower(trim(s));
    for (QuestionType t : all_question_types()) {
        if (needle == question_type_name(t)) return t;
    }
    throw UnknownQuestionType("unknown question type: '" + std::string(trim(s)) + "'");
}

ErrorType parse_error_type(std::string_view s) {
    std::string needle = to_lower(trim(s));
    std::replace(needle.begin(), needle.end(), ' ', '_');
    for (ErrorType t : all_error_types()) {
        if (needle == error_type_name(t)) return t;
    }
    throw UnknownErrorType("unknown error type: '" + std::string(trim(s)) + "'");
}

TypeTopicKey::TypeTopicKey(QuestionType type, std::span<const std::string> topics) : type_(type) {
    if (topics.empty()) throw EmptyTopics("type-topic key requires at least one topic");
    const std::size_t take = std::min<std::size_t>(2, topics.size());
    topics_.assign(topics.begin(), topics.begin() + take);
    std::sort(topics_.begin(), topics_.end());
    topics_.erase(std::unique(topics_.begin(), topics_.end()), topics_.end());
}

std::string TypeTopicKey::to_string() const {
    std::string out(question_type_name(type_));
    out += '|';
    out += join(topics_, ",");
    return out;
}

TypeTopicKey make_key(const FailureAnalysis& analysis) {
    if (analysis.topics.empty()) {
        throw EmptyTopics("analysis " + analysis.question_id + " has no topics");
    }
    return TypeTopicKey(analysis.question_type, analysis.topics);
}

std::string_view variant_name(VariantKind kind) {
    switch (kind) {
        case VariantKind::concise: return "concise";
        case VariantKind::reasoning: return "reasoning";
        case VariantKind::specific: return "specific";
    }
    return "concise";
}

VariantKind parse_variant(std::string_view s) {
    const std::string needle = to_lower(trim(s));
    for (VariantKind kind : kAllVariants) {
        if (needle == variant_name(kind)) return kind;
    }
    throw UnknownVariantKind("unknown enhancement variant: '" + std::string(trim(s)) + "'");
}

EnhancedPrompt make_enhanced_prompt(std::string base, VariantKind kind, std::string suffix) {
    EnhancedPrompt prompt;
    prompt.full_text = base + "\n\n" + suffix;
    prompt.base_prompt = std::move(base);
    prompt.variant = kind;
    prompt.suffix = std::move(suffix);
    return prompt;
}

} // namespace mars
