#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "mars/gateway.hpp"

namespace mars {

std::string sha256_hex(std::string_view data);

// One file per completion under `dir`, keyed by a content hash of
// (backend, model_name, messages, temperature, max_tokens, cache_salt).
class ResponseCache {
public:
    explicit ResponseCache(std::string dir);

    static std::string key_for(const ModelHandle& handle, const Messages& messages,
                               const ChatParams& params);

    std::optional<ChatResult> lookup(const std::string& key) const;
    void store(const std::string& key, const ChatResult& result);

    const std::string& dir() const { return dir_; }

private:
    std::string path_for(const std::string& key) const;
    std::string dir_;
};

// Serves hits without touching the inner client (so nothing lands in the
// ledger); misses pass through and are stored.
class CachedClient : public ChatClient {
public:
    CachedClient(std::unique_ptr<ChatClient> inner, std::shared_ptr<ResponseCache> cache);

    ChatResult chat(const Messages& messages, const ChatParams& params) override;
    const ModelHandle& handle() const override { return inner_->handle(); }

private:
    std::unique_ptr<ChatClient> inner_;
    std::shared_ptr<ResponseCache> cache_;
    std::mutex mu_;
};

} // namespace mars
