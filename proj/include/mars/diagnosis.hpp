#pragma once

#include <string>
#include <vector>

#include "mars/gateway.hpp"
#include "mars/taxonomy.hpp"

namespace mars {

// Analyzer input: one failed question plus the strategy it failed under.
// Clipping happens here, before rendering.
struct AnalyzerRequest {
    FailureRecord record;
    std::string strategy_name;
    std::size_t question_clip = 2000;
    std::size_t answer_clip = 500;
};

std::string render_analyzer_prompt(const AnalyzerRequest& req);

// Pull the first JSON object out of a completion (fences and prose tolerated)
// and validate it into a FailureAnalysis. Throws MalformedPayload,
// SchemaViolation, UnknownQuestionType or UnknownErrorType.
FailureAnalysis parse_analysis_payload(const std::string& text, const std::string& question_id);

struct SkipEntry {
    std::string question_id;  // or key string for synthesis skips
    std::string reason;
};

struct DiagnosisOptions {
    int max_payload_retries = 2;  // re-asks after a malformed payload
    int parallelism = 1;
    double temperature = 0.3;
    int max_tokens = 800;
};

struct DiagnosisResult {
    std::vector<FailureAnalysis> analyses;  // input order, skips removed
    std::vector<SkipEntry> skips;           // input order
};

// Phase 1 driver: one analyzer call per record, retried on malformed output,
// skipped after the retry budget. Provider exhaustion propagates.
DiagnosisResult diagnose_all(const std::vector<FailureRecord>& records,
                             const std::string& strategy_name, ChatClient& analyzer,
                             const DiagnosisOptions& options = {});

} // namespace mars
