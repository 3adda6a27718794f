#include "mars/cache.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "mars/errors.hpp"

namespace mars {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key_for(const ModelHandle& handle, const Messages& messages,
                                   const ChatParams& params) {
    // nlohmann objects serialize with sorted keys, so this dump is canonical.
    nlohmann::json key{{"backend", std::string(backend_name(handle.backend))},
                       {"model_name", handle.model_name},
                       {"temperature", params.temperature},
                       {"max_tokens", params.max_tokens},
                       {"salt", params.cache_salt}};
    key["messages"] = nlohmann::json::array();
    for (const auto& m : messages)
        key["messages"].push_back({{"role", m.role}, {"content", m.content}});
    return sha256_hex(key.dump());
}

std::string ResponseCache::path_for(const std::string& key) const {
    return dir_ + "/" + key + ".json";
}

std::optional<ChatResult> ResponseCache::lookup(const std::string& key) const {
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;  // treat a corrupt entry as a miss
    ChatResult result;
    result.text = j.value("text", "");
    result.usage.prompt_tokens = j.value("prompt_tokens", 0LL);
    result.usage.completion_tokens = j.value("completion_tokens", 0LL);
    result.from_cache = true;
    return result;
}

void ResponseCache::store(const std::string& key, const ChatResult& result) {
    const std::string path = path_for(key);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ValidationError("cannot write cache entry: " + tmp);
        out << nlohmann::json{{"text", result.text},
                              {"prompt_tokens", result.usage.prompt_tokens},
                              {"completion_tokens", result.usage.completion_tokens}}
                   .dump();
    }
    std::filesystem::rename(tmp, path);
}

CachedClient::CachedClient(std::unique_ptr<ChatClient> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

ChatResult CachedClient::chat(const Messages& messages, const ChatParams& params) {
    const std::string key = ResponseCache::key_for(inner_->handle(), messages, params);
    if (auto hit = cache_->lookup(key)) {
        // Cost is recomputed from stored usage so cached and live runs
        // produce identical records; the ledger sees nothing.
        hit->cost_usd = usage_cost(inner_->handle(), hit->usage);
        return *hit;
    }
    // Serialize misses: the mock backend consumes scripted completions in
    // request order, and interleaved store/lookup races are not worth it.
    std::lock_guard lock(mu_);
    if (auto hit = cache_->lookup(key)) {
        hit->cost_usd = usage_cost(inner_->handle(), hit->usage);
        return *hit;
    }
    ChatResult result = inner_->chat(messages, params);
    cache_->store(key, result);
    return result;
}

} // namespace mars
