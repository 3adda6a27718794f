#include "mars/diagnosis.hpp"

#include <optional>

#include "mars/json_extract.hpp"
#include "mars/parallel.hpp"
#include "mars/text.hpp"

namespace mars {

std::string render_analyzer_prompt(const AnalyzerRequest& req) {
    const auto& r = req.record;
    std::string prompt;
    prompt += "Analyze this failed question using \"" + req.strategy_name + "\" strategy.\n";
    prompt += "Question: ";
    prompt += clip_utf8(r.question_text, req.question_clip);
    prompt += "\nCorrect: ";
    prompt += clip_utf8(r.gold_answer, req.answer_clip);
    prompt += "\nModel Answer: ";
    prompt += clip_utf8(r.predicted_answer, req.answer_clip);
    prompt += "\nModel Reasoning: ";
    prompt += clip_utf8(r.reasoning_trace, req.question_clip);
    prompt +=
        "\n\n"
        "Classify question_type as exactly one of: factual, conceptual, calculation, "
        "application, analysis, comparison.\n"
        "Classify error_type as exactly one of: conceptual_misunderstanding, "
        "calculation_error, misreading, incomplete_analysis, wrong_elimination, "
        "knowledge_gap.\n"
        "Assign exactly one error_type; when several failure modes co-occur, pick the one "
        "at the earliest point of divergence in the reasoning chain.\n"
        "Use short lowercase topic names.\n"
        "\n"
        "Provide JSON analysis:\n"
        "{\n"
        "    \"question_type\": \"<factual/conceptual/calculation/application>\",\n"
        "    \"topics\": [\"<topic_1>\", \"<topic_2>\"],\n"
        "    \"error_type\": \"<conceptual_misunderstanding/calculation_error/...>\",\n"
        "    \"root_cause\": \"<fundamental reasoning deficit>\",\n"
        "    \"specific_mistake\": \"<exact step where logic diverged>\",\n"
        "    \"requires_knowledge\": [\"<knowledge_1>\"],\n"
        "    \"difficulty_factors\": [\"<factor_1>\"]\n"
        "}";
    return prompt;
}

namespace {

std::vector<std::string> read_string_list(const nlohmann::json& j, const char* field,
                                          const std::string& question_id) {
    std::vector<std::string> out;
    if (!j.contains(field)) return out;
    const auto& v = j.at(field);
    if (!v.is_array())
        throw SchemaViolation(question_id + ": field '" + field + "' must be an array");
    for (const auto& item : v) {
        if (!item.is_string())
            throw SchemaViolation(question_id + ": field '" + field +
                                  "' must contain only strings");
        std::string s{trim(item.get<std::string>())};
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

std::string read_string(const nlohmann::json& j, const char* field,
                        const std::string& question_id) {
    const auto& v = j.at(field);
    if (!v.is_string())
        throw SchemaViolation(question_id + ": field '" + field + "' must be a string");
    return v.get<std::string>();
}

} // namespace

FailureAnalysis parse_analysis_payload(const std::string& text, const std::string& question_id) {
    nlohmann::json j = extract_first_json_object(text);
    for (const char* field :
         {"question_type", "topics", "error_type", "root_cause", "specific_mistake"}) {
        if (!j.contains(field))
            throw SchemaViolation(question_id + ": missing required field '" + field + "'");
    }
    // One failure, one category: a list of error types is a schema breach,
    // not something to silently pick from.
    if (j.at("error_type").is_array())
        throw SchemaViolation(question_id + ": error_type must be a single category, not an array");

    FailureAnalysis a;
    a.question_id = question_id;
    a.question_type = parse_question_type(read_string(j, "question_type", question_id));
    a.error_type = parse_error_type(read_string(j, "error_type", question_id));
    a.topics = read_string_list(j, "topics", question_id);
    if (a.topics.empty())
        throw SchemaViolation(question_id + ": topics must contain at least one non-empty string");
    a.root_cause = read_string(j, "root_cause", question_id);
    a.specific_mistake = read_string(j, "specific_mistake", question_id);
    a.requires_knowledge = read_string_list(j, "requires_knowledge", question_id);
    a.difficulty_factors = read_string_list(j, "difficulty_factors", question_id);
    return a;
}

DiagnosisResult diagnose_all(const std::vector<FailureRecord>& records,
                             const std::string& strategy_name, ChatClient& analyzer,
                             const DiagnosisOptions& options) {
    if (records.empty()) throw EmptyInput("diagnose_all requires at least one failure record");

    std::vector<std::optional<FailureAnalysis>> analyses(records.size());
    std::vector<std::optional<SkipEntry>> skips(records.size());

    parallel_for_indexed(records.size(), options.parallelism, [&](std::size_t i) {
        AnalyzerRequest req{records[i], strategy_name};
        const std::string prompt = render_analyzer_prompt(req);
        ChatParams params;
        params.temperature = options.temperature;
        params.max_tokens = options.max_tokens;

        std::string last_reason = "no attempts made";
        const int attempts = options.max_payload_retries + 1;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            std::string body = prompt;
            if (attempt > 0) body += "\n\nReturn only JSON.";
            params.cache_salt = attempt == 0 ? "" : "retry-" + std::to_string(attempt);
            ChatResult result = analyzer.chat({{"user", body}}, params);
            try {
                analyses[i] = parse_analysis_payload(result.text, records[i].question_id);
                return;
            } catch (const Error& e) {
                last_reason = e.what();
            }
        }
        skips[i] = SkipEntry{records[i].question_id, last_reason};
    });

    DiagnosisResult out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (analyses[i]) out.analyses.push_back(std::move(*analyses[i]));
        if (skips[i]) out.skips.push_back(std::move(*skips[i]));
    }
    if (out.analyses.empty()) {
        throw AllDiagnosesFailed("all " + std::to_string(records.size()) +
                                 " diagnosis payloads were unusable after retries");
    }
    return out;
}

} // namespace mars
