#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mars/diagnosis.hpp"
#include "mars/gateway.hpp"
#include "mars/taxonomy.hpp"

namespace mars {

std::string render_synthesizer_prompt(const TypeTopicGroup& group);

// Validate a synthesizer completion into an Enhancement for `group`.
// Throws MalformedPayload / SchemaViolation.
Enhancement parse_enhancement_payload(const std::string& text, const TypeTopicGroup& group);

struct SynthesisOptions {
    int max_payload_retries = 2;
    int parallelism = 1;
    double temperature = 0.3;
    int max_tokens = 800;
};

Enhancement synthesize_group(const TypeTopicGroup& group, ChatClient& synthesizer,
                             const SynthesisOptions& options = {});

struct SynthesisResult {
    std::vector<Enhancement> enhancements;  // input group order, skips removed
    std::vector<SkipEntry> skips;           // question_id field holds the key string
};

SynthesisResult synthesize_groups(const std::vector<TypeTopicGroup>& groups,
                                  ChatClient& synthesizer, const SynthesisOptions& options = {});

// Normalized cardinality weights w_j = |G_j| / sum |G_k|, in input order.
std::vector<double> weights(const std::vector<Enhancement>& enhancements);

// Render the requested variants over the cardinality-ranked enhancements.
// Throws NoEnhancements on an empty list.
std::map<VariantKind, EnhancedPrompt> render_enhanced_prompts(
    const std::string& base, std::vector<Enhancement> enhancements, const std::string& category,
    const std::set<VariantKind>& kinds = {VariantKind::concise, VariantKind::reasoning,
                                          VariantKind::specific});

nlohmann::json enhancement_to_json(const Enhancement& e);
Enhancement enhancement_from_json(const nlohmann::json& j);

} // namespace mars
