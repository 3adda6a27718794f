#include "mars/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "mars/json_extract.hpp"
#include "mars/parallel.hpp"
#include "mars/text.hpp"

namespace mars {

namespace {

std::string upper_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

template <typename Set>
std::string join_set(const Set& items, std::string_view sep) {
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += sep;
        out += item;
    }
    return out;
}

} // namespace

std::string render_synthesizer_prompt(const TypeTopicGroup& group) {
    std::string prompt;
    prompt += "Synthesize prompt guidance from a cluster of failed questions.\n";
    prompt += "Question Type: ";
    prompt += question_type_name(group.key.question_type());
    prompt += "\nTopics: " + join(group.key.topic_set(), ", ");
    prompt += "\nThis cluster contains " + std::to_string(group.size()) + " failures.\n";

    std::string error_names;
    for (auto e : group.error_types) {
        if (!error_names.empty()) error_names += ", ";
        error_names += error_type_name(e);
    }
    prompt += "Observed error types: " + error_names + "\n";
    prompt += "Shared root causes:\n";
    for (const auto& rc : group.root_causes) prompt += "- " + rc + "\n";
    prompt += "Required knowledge:\n";
    for (const auto& k : group.required_knowledge) prompt += "- " + k + "\n";
    prompt += "Difficulty factors:\n";
    for (const auto& f : group.difficulty_factors) prompt += "- " + f + "\n";
    prompt +=
        "\nIdentify the recurring error patterns and produce targeted guidance that would "
        "prevent these failures.\n"
        "\n"
        "Provide JSON enhancement:\n"
        "{\n"
        "    \"key_warnings\": [\"<warning_1>\", \"<warning_2>\"],\n"
        "    \"common_mistakes\": [\"<mistake_1>\"],\n"
        "    \"verification_steps\": [\"<step_1>\"],\n"
        "    \"type_specific_approach\": \"<how to approach this question type>\",\n"
        "    \"enhanced_prompt_addition\": \"<concise guidance to prevent these errors>\"\n"
        "}";
    return prompt;
}

namespace {

std::vector<std::string> read_list(const nlohmann::json& j, const char* field,
                                   const std::string& context) {
    std::vector<std::string> out;
    if (!j.contains(field)) return out;
    const auto& v = j.at(field);
    if (!v.is_array())
        throw SchemaViolation(context + ": field '" + field + "' must be an array");
    for (const auto& item : v) {
        if (!item.is_string())
            throw SchemaViolation(context + ": field '" + field + "' must contain only strings");
        std::string s{trim(item.get<std::string>())};
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

} // namespace

Enhancement parse_enhancement_payload(const std::string& text, const TypeTopicGroup& group) {
    const std::string context = group.key.to_string();
    nlohmann::json j = extract_first_json_object(text);
    if (!j.contains("enhanced_prompt_addition") || !j.at("enhanced_prompt_addition").is_string())
        throw SchemaViolation(context + ": missing required field 'enhanced_prompt_addition'");
    std::string addition{trim(j.at("enhanced_prompt_addition").get<std::string>())};
    if (addition.empty())
        throw SchemaViolation(context + ": enhanced_prompt_addition must be non-empty");

    Enhancement e{group.key, group.size(), {}, {}, {}, {}, {}};
    e.key_warnings = read_list(j, "key_warnings", context);
    e.common_mistakes = read_list(j, "common_mistakes", context);
    e.verification_steps = read_list(j, "verification_steps", context);
    if (j.contains("type_specific_approach")) {
        if (!j.at("type_specific_approach").is_string())
            throw SchemaViolation(context + ": type_specific_approach must be a string");
        e.type_specific_approach = trim(j.at("type_specific_approach").get<std::string>());
    }
    e.enhanced_prompt_addition = std::move(addition);
    return e;
}

Enhancement synthesize_group(const TypeTopicGroup& group, ChatClient& synthesizer,
                             const SynthesisOptions& options) {
    const std::string prompt = render_synthesizer_prompt(group);
    ChatParams params;
    params.temperature = options.temperature;
    params.max_tokens = options.max_tokens;

    std::string last_reason = "no attempts made";
    const int attempts = options.max_payload_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        std::string body = prompt;
        if (attempt > 0) body += "\n\nReturn only JSON.";
        params.cache_salt = attempt == 0 ? "" : "retry-" + std::to_string(attempt);
        ChatResult result = synthesizer.chat({{"user", body}}, params);
        try {
            return parse_enhancement_payload(result.text, group);
        } catch (const Error& e) {
            last_reason = e.what();
        }
    }
    throw MalformedPayload(group.key.to_string() + ": " + last_reason);
}

SynthesisResult synthesize_groups(const std::vector<TypeTopicGroup>& groups,
                                  ChatClient& synthesizer, const SynthesisOptions& options) {
    if (groups.empty()) throw EmptyInput("synthesize_groups requires at least one group");

    std::vector<std::optional<Enhancement>> enhancements(groups.size());
    std::vector<std::optional<SkipEntry>> skips(groups.size());
    parallel_for_indexed(groups.size(), options.parallelism, [&](std::size_t i) {
        try {
            enhancements[i] = synthesize_group(groups[i], synthesizer, options);
        } catch (const MalformedPayload& e) {
            skips[i] = SkipEntry{groups[i].key.to_string(), e.what()};
        } catch (const SchemaViolation& e) {
            skips[i] = SkipEntry{groups[i].key.to_string(), e.what()};
        }
    });

    SynthesisResult out;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (enhancements[i]) out.enhancements.push_back(std::move(*enhancements[i]));
        if (skips[i]) out.skips.push_back(std::move(*skips[i]));
    }
    return out;
}

std::vector<double> weights(const std::vector<Enhancement>& enhancements) {
    if (enhancements.empty()) throw EmptyInput("weights requires at least one enhancement");
    double total = 0.0;
    for (const auto& e : enhancements) total += static_cast<double>(e.num_questions);
    std::vector<double> out;
    out.reserve(enhancements.size());
    for (const auto& e : enhancements)
        out.push_back(static_cast<double>(e.num_questions) / total);
    return out;
}

namespace {

// Cardinality ordering shared by all three renderers: heaviest groups first,
// ties by key string so rendering is reproducible.
void rank_by_cardinality(std::vector<Enhancement>& enhancements) {
    std::stable_sort(enhancements.begin(), enhancements.end(), [](const auto& a, const auto& b) {
        if (a.num_questions != b.num_questions) return a.num_questions > b.num_questions;
        return a.key.to_string() < b.key.to_string();
    });
}

template <typename Fn>
void for_top(const std::vector<Enhancement>& ranked, std::size_t limit, Fn&& fn) {
    for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) fn(ranked[i]);
}

std::vector<std::string> first_n(const std::vector<std::string>& items, std::size_t n) {
    return {items.begin(), items.begin() + std::min(items.size(), n)};
}

} // namespace

std::map<VariantKind, EnhancedPrompt> render_enhanced_prompts(
    const std::string& base, std::vector<Enhancement> enhancements, const std::string& category,
    const std::set<VariantKind>& kinds) {
    if (enhancements.empty())
        throw NoEnhancements("render_enhanced_prompts called with no enhancements for category '" +
                             category + "'");
    rank_by_cardinality(enhancements);
    const std::string header = "## GUIDANCE FOR " + upper_ascii(category) + "\n";

    std::map<VariantKind, EnhancedPrompt> out;
    if (kinds.contains(VariantKind::concise)) {
        std::string text = header;
        text += "### Critical Warnings by Question Type:\n\n";
        for_top(enhancements, 8, [&](const Enhancement& e) {
            text += "**";
            text += question_type_name(e.key.question_type());
            text += " (" + join(e.key.topic_set(), "/") + ")** ";
            text += "(" + std::to_string(e.num_questions) + " failures):\n";
            text += "[!] " + join(first_n(e.key_warnings, 3), " | ") + "\n";
            text += " -> " + e.enhanced_prompt_addition + "\n\n";
        });
        out.emplace(VariantKind::concise, make_enhanced_prompt(base, VariantKind::concise, text));
    }
    if (kinds.contains(VariantKind::reasoning)) {
        std::string text = header;
        text += "### Key Considerations by Problem Type:\n\n";
        for_top(enhancements, 6, [&](const Enhancement& e) {
            text += "* ";
            text += question_type_name(e.key.question_type());
            text += " (" + join(e.key.topic_set(), "/") + "): ";
            text += e.enhanced_prompt_addition + "\n";
        });
        out.emplace(VariantKind::reasoning,
                    make_enhanced_prompt(base, VariantKind::reasoning, text));
    }
    if (kinds.contains(VariantKind::specific)) {
        std::string text = header;
        for_top(enhancements, 10, [&](const Enhancement& e) {
            text += "**";
            text += question_type_name(e.key.question_type());
            text += " - " + join(e.key.topic_set(), " & ") + "**\n";
            text += "Common Mistakes:\n";
            for (const auto& m : first_n(e.common_mistakes, 3)) text += "  x " + m + "\n";
            text += "Verification Steps:\n";
            for (const auto& s : first_n(e.verification_steps, 4)) text += "  + " + s + "\n";
            text += "Approach: " + e.type_specific_approach + "\n\n";
        });
        out.emplace(VariantKind::specific, make_enhanced_prompt(base, VariantKind::specific, text));
    }
    return out;
}

nlohmann::json enhancement_to_json(const Enhancement& e) {
    return {{"key", e.key.to_string()},
            {"question_type", question_type_name(e.key.question_type())},
            {"topics", e.key.topic_set()},
            {"num_questions", e.num_questions},
            {"key_warnings", e.key_warnings},
            {"common_mistakes", e.common_mistakes},
            {"verification_steps", e.verification_steps},
            {"type_specific_approach", e.type_specific_approach},
            {"enhanced_prompt_addition", e.enhanced_prompt_addition}};
}

Enhancement enhancement_from_json(const nlohmann::json& j) {
    auto topics = j.at("topics").get<std::vector<std::string>>();
    Enhancement e{TypeTopicKey(parse_question_type(j.at("question_type").get<std::string>()),
                               topics),
                  j.at("num_questions").get<std::size_t>(),
                  {}, {}, {}, {}, {}};
    e.key_warnings = j.value("key_warnings", std::vector<std::string>{});
    e.common_mistakes = j.value("common_mistakes", std::vector<std::string>{});
    e.verification_steps = j.value("verification_steps", std::vector<std::string>{});
    e.type_specific_approach = j.value("type_specific_approach", "");
    e.enhanced_prompt_addition = j.value("enhanced_prompt_addition", "");
    return e;
}

} // namespace mars
