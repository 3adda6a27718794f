#include "mars/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mars/errors.hpp"

namespace mars {

Config::Config() {
    analyzer.role = "analyzer";
    synthesizer.role = "synthesizer";
    evaluator.role = "evaluator";
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key))
            throw ValidationError("config: unknown key '" + key + "' in " + where);
    }
}

void read_model(const nlohmann::json& j, ModelHandle& handle, const std::string& where) {
    reject_unknown_keys(j,
                        {"backend", "model", "endpoint", "api_key", "price_per_1k_input",
                         "price_per_1k_output", "timeout_seconds", "max_retries"},
                        where);
    if (j.contains("backend")) handle.backend = parse_backend(j.at("backend").get<std::string>());
    if (j.contains("model")) handle.model_name = j.at("model").get<std::string>();
    if (j.contains("endpoint")) handle.endpoint = j.at("endpoint").get<std::string>();
    if (j.contains("api_key")) handle.api_key = j.at("api_key").get<std::string>();
    if (j.contains("price_per_1k_input"))
        handle.price_per_1k_input = j.at("price_per_1k_input").get<double>();
    if (j.contains("price_per_1k_output"))
        handle.price_per_1k_output = j.at("price_per_1k_output").get<double>();
    if (j.contains("timeout_seconds")) handle.timeout_seconds = j.at("timeout_seconds").get<int>();
    if (j.contains("max_retries")) handle.max_retries = j.at("max_retries").get<int>();
    if (handle.price_per_1k_input < 0 || handle.price_per_1k_output < 0)
        throw ValidationError("config: prices must be >= 0 in " + where);
    if (handle.timeout_seconds <= 0)
        throw ValidationError("config: timeout_seconds must be > 0 in " + where);
}

void read_strategy(const nlohmann::json& j, StrategyConfig& strategy) {
    reject_unknown_keys(j,
                        {"temperature", "max_tokens", "sc_samples", "sc_temperature",
                         "refine_rounds", "score", "demonstrations"},
                        "strategy");
    if (j.contains("temperature")) strategy.temperature = j.at("temperature").get<double>();
    if (j.contains("max_tokens")) strategy.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("sc_samples")) strategy.sc_samples = j.at("sc_samples").get<int>();
    if (j.contains("sc_temperature"))
        strategy.sc_temperature = j.at("sc_temperature").get<double>();
    if (j.contains("refine_rounds")) strategy.refine_rounds = j.at("refine_rounds").get<int>();
    if (j.contains("score")) strategy.score_mode = parse_score_mode(j.at("score").get<std::string>());
    if (j.contains("demonstrations")) {
        for (const auto& dj : j.at("demonstrations")) {
            strategy.demonstrations.push_back({dj.at("question").get<std::string>(),
                                               dj.at("reasoning").get<std::string>(),
                                               dj.at("answer").get<std::string>()});
        }
    }
    if (strategy.sc_samples < 1)
        throw ValidationError("config: sc_samples must be >= 1");
    if (strategy.temperature < 0 || strategy.sc_temperature < 0)
        throw ValidationError("config: temperatures must be >= 0");
}

void read_split(const nlohmann::json& j, SplitSpec& split) {
    reject_unknown_keys(j, {"train", "val", "test", "seed"}, "split");
    if (j.contains("train")) split.train_ratio = j.at("train").get<double>();
    if (j.contains("val")) split.val_ratio = j.at("val").get<double>();
    if (j.contains("test")) split.test_ratio = j.at("test").get<double>();
    if (j.contains("seed")) split.seed = j.at("seed").get<std::uint64_t>();
}

void apply_env(Config& config) {
    const char* base = std::getenv("MARS_API_BASE");
    const char* key = std::getenv("MARS_API_KEY");
    for (ModelHandle* handle : {&config.analyzer, &config.synthesizer, &config.evaluator}) {
        if (base && *base) handle->endpoint = base;
        if (key && *key) handle->api_key = key;
    }
}

} // namespace

Config load_config(const std::optional<std::string>& path) {
    Config config;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ValidationError("cannot open config file: " + *path);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded())
            throw ValidationError("config file is not valid JSON: " + *path);
        reject_unknown_keys(j, {"models", "strategy", "split"}, "top level");
        if (j.contains("models")) {
            const auto& models = j.at("models");
            reject_unknown_keys(models, {"analyzer", "synthesizer", "evaluator"}, "models");
            if (models.contains("analyzer"))
                read_model(models.at("analyzer"), config.analyzer, "models.analyzer");
            if (models.contains("synthesizer"))
                read_model(models.at("synthesizer"), config.synthesizer, "models.synthesizer");
            if (models.contains("evaluator"))
                read_model(models.at("evaluator"), config.evaluator, "models.evaluator");
        }
        if (j.contains("strategy")) read_strategy(j.at("strategy"), config.strategy);
        if (j.contains("split")) read_split(j.at("split"), config.split);
    }
    apply_env(config);
    return config;
}

} // namespace mars
