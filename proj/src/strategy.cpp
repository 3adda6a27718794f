#include "mars/strategy.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>

#include "mars/parallel.hpp"
#include "mars/text.hpp"

namespace mars {

std::string_view strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::zero_shot: return "zero_shot";
        case StrategyKind::zero_shot_cot: return "zero_shot_cot";
        case StrategyKind::few_shot_cot: return "few_shot_cot";
        case StrategyKind::self_refine: return "self_refine";
        case StrategyKind::self_consistency: return "self_consistency";
    }
    return "zero_shot";
}

StrategyKind parse_strategy(std::string_view s) {
    std::string norm = to_lower(trim(s));
    std::replace(norm.begin(), norm.end(), '-', '_');
    for (StrategyKind kind :
         {StrategyKind::zero_shot, StrategyKind::zero_shot_cot, StrategyKind::few_shot_cot,
          StrategyKind::self_refine, StrategyKind::self_consistency}) {
        if (norm == strategy_name(kind)) return kind;
    }
    throw UnknownStrategy("unknown strategy: " + std::string(s));
}

std::string_view score_mode_name(ScoreMode mode) {
    return mode == ScoreMode::accuracy ? "accuracy" : "token_f1";
}

ScoreMode parse_score_mode(std::string_view s) {
    std::string norm = to_lower(trim(s));
    if (norm == "accuracy") return ScoreMode::accuracy;
    if (norm == "token_f1" || norm == "f1") return ScoreMode::token_f1;
    throw ValidationError("unknown score mode: " + std::string(s));
}

namespace {

constexpr std::string_view kFormatInstruction =
    "Write your reasoning inside <reasoning></reasoning> tags and your final answer inside "
    "<answer></answer> tags.";

constexpr std::string_view kCotTrigger = "Let's think step by step.";

std::string question_block(const DatasetItem& item) {
    std::string block = "Question: " + item.question + "\n";
    if (!item.options.empty()) {
        block += "Options:\n";
        for (std::size_t i = 0; i < item.options.size(); ++i) {
            block += static_cast<char>('A' + i);
            block += ") " + item.options[i] + "\n";
        }
    }
    return block;
}

const Demonstration& builtin_demonstration() {
    static const Demonstration demo{
        "What is 12 + 30?",
        "12 plus 30: adding the tens gives 10 + 30 = 40, plus the remaining 2 gives 42.",
        "42"};
    return demo;
}

std::string zero_shot_prompt(const DatasetItem& item, const std::string& base) {
    std::string prompt = base;
    prompt += "\n\n";
    prompt += question_block(item);
    prompt += "\n";
    prompt += kFormatInstruction;
    return prompt;
}

} // namespace

std::string render_strategy_prompt(const StrategyConfig& config, const DatasetItem& item,
                                   const std::string& prompt_base) {
    switch (config.kind) {
        case StrategyKind::zero_shot:
        case StrategyKind::self_refine:
        case StrategyKind::self_consistency:
            return zero_shot_prompt(item, prompt_base);
        case StrategyKind::zero_shot_cot: {
            std::string prompt = zero_shot_prompt(item, prompt_base);
            prompt += "\n\n";
            prompt += kCotTrigger;
            return prompt;
        }
        case StrategyKind::few_shot_cot: {
            std::string prompt = prompt_base;
            prompt += "\n\n";
            const auto& demos = config.demonstrations.empty()
                                    ? std::vector<Demonstration>{builtin_demonstration()}
                                    : config.demonstrations;
            for (const auto& demo : demos) {
                prompt += "Here is a worked example:\n";
                prompt += "Question: " + demo.question + "\n";
                prompt += "<reasoning>" + demo.reasoning + "</reasoning>\n";
                prompt += "<answer>" + demo.answer + "</answer>\n\n";
            }
            prompt += "Now answer the following question.\n\n";
            prompt += question_block(item);
            prompt += "\n";
            prompt += kFormatInstruction;
            return prompt;
        }
    }
    throw UnknownStrategy("unhandled strategy kind");
}

std::string render_critique_prompt(const DatasetItem& item, const std::string& prompt_base,
                                   const std::string& prior_solution) {
    std::string prompt = prompt_base;
    prompt += "\n\n";
    prompt += question_block(item);
    prompt += "\nProposed solution:\n" + prior_solution + "\n\n";
    prompt +=
        "Critique the proposed solution. Point out any errors in reasoning, calculation, or "
        "interpretation of the question. Be specific and brief.";
    return prompt;
}

std::string render_revise_prompt(const DatasetItem& item, const std::string& prompt_base,
                                 const std::string& prior_solution, const std::string& critique) {
    std::string prompt = prompt_base;
    prompt += "\n\n";
    prompt += question_block(item);
    prompt += "\nProposed solution:\n" + prior_solution + "\n\n";
    prompt += "Critique:\n" + critique + "\n\n";
    prompt += "Revise the solution, fixing every problem the critique identifies. ";
    prompt += kFormatInstruction;
    return prompt;
}

namespace {

// Full-string numeric parse; commas tolerated as thousands separators.
std::optional<double> parse_number(std::string_view s) {
    std::string cleaned;
    for (char c : trim(s)) {
        if (c == ',') continue;
        cleaned += c;
    }
    if (cleaned.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    double value = std::strtod(cleaned.c_str(), &end);
    if (errno != 0 || end != cleaned.c_str() + cleaned.size()) return std::nullopt;
    return value;
}

std::string canonical_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

// "(b)", "C.", "answer b" → the bare uppercase letter, when one letter remains.
std::optional<char> letter_of(std::string_view s, std::size_t option_count) {
    std::string t{trim(s)};
    std::string lower = to_lower(t);
    for (std::string_view prefix : {"option ", "choice ", "answer "}) {
        if (lower.starts_with(prefix)) {
            t = std::string(trim(t.substr(prefix.size())));
            break;
        }
    }
    while (!t.empty() && (t.front() == '(' || t.front() == '[')) t.erase(t.begin());
    while (!t.empty() &&
           (t.back() == ')' || t.back() == ']' || t.back() == '.' || t.back() == ':')) {
        t.pop_back();
    }
    if (t.size() != 1 || !std::isalpha(static_cast<unsigned char>(t[0]))) return std::nullopt;
    char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
    if (static_cast<std::size_t>(letter - 'A') >= option_count) return std::nullopt;
    return letter;
}

std::string strip_lead_in(std::string_view line) {
    std::string t{trim(line)};
    std::string lower = to_lower(t);
    for (std::string_view prefix : {"the final answer is", "final answer is", "the answer is",
                                    "final answer", "answer is", "answer"}) {
        if (!lower.starts_with(prefix)) continue;
        std::string_view rest = std::string_view(t).substr(prefix.size());
        // The lead-in must end at a word boundary ("answers vary" is content).
        if (!rest.empty() && std::isalnum(static_cast<unsigned char>(rest.front()))) continue;
        rest = trim(rest);
        if (!rest.empty() && (rest.front() == ':' || rest.front() == '=')) {
            rest.remove_prefix(1);
            rest = trim(rest);
        }
        if (!rest.empty()) return std::string(rest);
        break;
    }
    return t;
}

} // namespace

std::string extract_answer(const std::string& completion) {
    if (trim(completion).empty())
        throw EmptyCompletion("cannot extract an answer from an empty completion");

    constexpr std::string_view open_tag = "<answer>";
    constexpr std::string_view close_tag = "</answer>";
    std::size_t best_start = std::string::npos;
    std::size_t best_end = std::string::npos;
    for (std::size_t pos = completion.find(open_tag); pos != std::string::npos;
         pos = completion.find(open_tag, pos + 1)) {
        std::size_t content = pos + open_tag.size();
        std::size_t close = completion.find(close_tag, content);
        if (close == std::string::npos) break;
        best_start = content;
        best_end = close;
    }
    if (best_start != std::string::npos)
        return std::string(trim(std::string_view(completion).substr(best_start, best_end - best_start)));

    // No tags: last non-empty line, minus common lead-ins, numbers canonicalized.
    auto lines = split(completion, '\n');
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (trim(*it).empty()) continue;
        std::string answer = strip_lead_in(*it);
        if (auto value = parse_number(answer)) return canonical_number(*value);
        return answer;
    }
    throw EmptyCompletion("completion has no non-empty line");
}

std::string extract_answer(const std::string& completion,
                           const std::vector<std::string>& options) {
    std::string answer = extract_answer(completion);
    if (!options.empty()) {
        if (auto letter = letter_of(answer, options.size())) return std::string(1, *letter);
    }
    return answer;
}

std::string majority_vote(const std::vector<std::string>& answers) {
    if (answers.empty()) throw EmptyInput("majority_vote requires at least one answer");
    std::map<std::string, std::size_t> counts;       // normalized class → count
    std::map<std::string, std::size_t> first_seen;   // normalized class → first index
    for (std::size_t i = 0; i < answers.size(); ++i) {
        std::string key = normalize_ws(answers[i]);
        ++counts[key];
        first_seen.emplace(key, i);
    }
    std::string best_key;
    std::size_t best_count = 0;
    std::size_t best_first = answers.size();
    for (const auto& [key, count] : counts) {
        std::size_t first = first_seen[key];
        if (count > best_count || (count == best_count && first < best_first)) {
            best_key = key;
            best_count = count;
            best_first = first;
        }
    }
    return answers[best_first];
}

double score_accuracy(const std::string& extracted, const std::string& gold,
                      const std::vector<std::string>& options) {
    std::string ne = normalize_ws(extracted);
    std::string ng = normalize_ws(gold);
    if (!ne.empty() && ne == ng) return 1.0;

    if (!options.empty()) {
        auto le = letter_of(extracted, options.size());
        auto lg = letter_of(gold, options.size());
        if (le && lg) return *le == *lg ? 1.0 : 0.0;
        // One side is a letter, the other spells the option's text.
        if (lg && normalize_ws(options[static_cast<std::size_t>(*lg - 'A')]) == ne) return 1.0;
        if (le && normalize_ws(options[static_cast<std::size_t>(*le - 'A')]) == ng) return 1.0;
    }

    auto de = parse_number(extracted);
    auto dg = parse_number(gold);
    if (de && dg) return *de == *dg ? 1.0 : 0.0;
    return 0.0;
}

namespace {

std::vector<std::string> f1_tokens(const std::string& s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (char c : s) {
        auto uc = static_cast<unsigned char>(c);
        if (std::ispunct(uc)) continue;
        cleaned += static_cast<char>(std::tolower(uc));
    }
    std::vector<std::string> tokens;
    for (auto& piece : split_whitespace(cleaned)) {
        if (piece == "a" || piece == "an" || piece == "the") continue;
        tokens.push_back(std::move(piece));
    }
    return tokens;
}

} // namespace

double score_token_f1(const std::string& pred, const std::string& gold) {
    auto tp = f1_tokens(pred);
    auto tg = f1_tokens(gold);
    if (tp.empty() && tg.empty()) return 1.0;
    if (tp.empty() || tg.empty()) return 0.0;

    std::map<std::string, std::size_t> gold_counts;
    for (const auto& t : tg) ++gold_counts[t];
    std::size_t overlap = 0;
    for (const auto& t : tp) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(tp.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(tg.size());
    return 2.0 * precision * recall / (precision + recall);
}

double score_item(const StrategyConfig& config, const std::string& extracted,
                  const DatasetItem& item) {
    if (config.score_mode == ScoreMode::token_f1) return score_token_f1(extracted, item.answer);
    return score_accuracy(extracted, item.answer, item.options);
}

namespace {

void add_usage(RunRecord& record, const ChatResult& result) {
    record.prompt_tokens += result.usage.prompt_tokens;
    record.completion_tokens += result.usage.completion_tokens;
    record.cost_usd = round_usd(record.cost_usd + result.cost_usd);
}

void run_one(const StrategyConfig& config, const DatasetItem& item, const std::string& base,
             ChatClient& client, RunRecord& record) {
    ChatParams params;
    params.temperature = config.temperature;
    params.max_tokens = config.max_tokens;
    const std::string prompt = render_strategy_prompt(config, item, base);

    switch (config.kind) {
        case StrategyKind::zero_shot:
        case StrategyKind::zero_shot_cot:
        case StrategyKind::few_shot_cot: {
            ChatResult result = client.chat({{"user", prompt}}, params);
            add_usage(record, result);
            record.raw_completion = result.text;
            record.extracted_answer = extract_answer(result.text, item.options);
            return;
        }
        case StrategyKind::self_consistency: {
            params.temperature = config.sc_temperature;
            std::vector<std::string> votes;
            std::vector<std::string> raws;
            for (int k = 0; k < std::max(1, config.sc_samples); ++k) {
                params.cache_salt = k == 0 ? "" : "sc-" + std::to_string(k);
                ChatResult result = client.chat({{"user", prompt}}, params);
                add_usage(record, result);
                raws.push_back(result.text);
                votes.push_back(extract_answer(result.text, item.options));
            }
            std::string winner = majority_vote(votes);
            record.extracted_answer = winner;
            for (std::size_t k = 0; k < votes.size(); ++k) {
                if (normalize_ws(votes[k]) == normalize_ws(winner)) {
                    record.raw_completion = raws[k];
                    break;
                }
            }
            return;
        }
        case StrategyKind::self_refine: {
            ChatResult result = client.chat({{"user", prompt}}, params);
            add_usage(record, result);
            std::string current = result.text;
            for (int round = 0; round < std::max(0, config.refine_rounds); ++round) {
                ChatResult critique =
                    client.chat({{"user", render_critique_prompt(item, base, current)}}, params);
                add_usage(record, critique);
                ChatResult revised = client.chat(
                    {{"user", render_revise_prompt(item, base, current, critique.text)}}, params);
                add_usage(record, revised);
                current = revised.text;
            }
            record.raw_completion = current;
            record.extracted_answer = extract_answer(current, item.options);
            return;
        }
    }
    throw UnknownStrategy("unhandled strategy kind");
}

} // namespace

std::vector<RunRecord> run_strategy(const StrategyConfig& config,
                                    const std::vector<DatasetItem>& items,
                                    const PromptFor& prompt_for, ChatClient& client,
                                    const RunOptions& options) {
    if (items.empty()) throw EmptyDataset("run_strategy requires at least one item");

    std::vector<RunRecord> records(items.size());
    std::atomic<std::size_t> provider_failures{0};
    parallel_for_indexed(items.size(), options.parallelism, [&](std::size_t i) {
        const DatasetItem& item = items[i];
        RunRecord& record = records[i];
        record.strategy = strategy_name(config.kind);
        record.variant = options.variant;
        record.question_id = item.id;
        record.category = item.category;
        try {
            run_one(config, item, prompt_for(item), client, record);
            record.score = score_item(config, record.extracted_answer, item);
        } catch (const ProviderExhausted& e) {
            record.score = 0.0;
            record.error = e.what();
            provider_failures.fetch_add(1);
        } catch (const Error& e) {
            record.score = 0.0;
            record.error = e.what();
        }
    });

    if (provider_failures.load() == items.size()) {
        throw ProviderError("every item failed with provider errors; first: " + records[0].error);
    }
    return records;
}

nlohmann::json run_record_to_json(const RunRecord& record) {
    nlohmann::json j{{"strategy", record.strategy},
                     {"question_id", record.question_id},
                     {"category", record.category},
                     {"raw_completion", record.raw_completion},
                     {"extracted_answer", record.extracted_answer},
                     {"score", record.score},
                     {"prompt_tokens", record.prompt_tokens},
                     {"completion_tokens", record.completion_tokens},
                     {"cost_usd", record.cost_usd}};
    j["variant"] = record.variant ? nlohmann::json(std::string(variant_name(*record.variant)))
                                  : nlohmann::json(nullptr);
    if (!record.error.empty()) j["error"] = record.error;
    return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
    RunRecord record;
    record.strategy = j.at("strategy").get<std::string>();
    if (j.contains("variant") && !j.at("variant").is_null())
        record.variant = parse_variant(j.at("variant").get<std::string>());
    record.question_id = j.at("question_id").get<std::string>();
    record.category = j.value("category", "");
    record.raw_completion = j.value("raw_completion", "");
    record.extracted_answer = j.value("extracted_answer", "");
    record.score = j.at("score").get<double>();
    record.prompt_tokens = j.value("prompt_tokens", 0LL);
    record.completion_tokens = j.value("completion_tokens", 0LL);
    record.cost_usd = j.value("cost_usd", 0.0);
    record.error = j.value("error", "");
    return record;
}

std::vector<RunRecord> load_run_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open results file: " + path);
    std::vector<RunRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ValidationError(path + ":" + std::to_string(line_no) + ": not valid JSON");
        records.push_back(run_record_from_json(j));
    }
    return records;
}

void save_run_records(const std::string& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write results file: " + path);
    for (const auto& record : records) out << run_record_to_json(record).dump() << "\n";
}

} // namespace mars
