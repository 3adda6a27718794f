#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mars/errors.hpp"

namespace mars {

enum class Backend { http, mock };

Backend parse_backend(std::string_view s);
std::string_view backend_name(Backend b);

// Binding of one model role (analyzer / synthesizer / evaluator) to a backend.
struct ModelHandle {
    Backend backend = Backend::mock;
    std::string role = "evaluator";
    std::string model_name = "gpt-3.5-turbo";
    std::string endpoint;  // http only; MARS_API_BASE overrides
    std::string api_key;   // http only; MARS_API_KEY overrides
    double price_per_1k_input = 0.0005;
    double price_per_1k_output = 0.0015;
    int timeout_seconds = 30;  // per attempt
    int max_retries = 3;
    double backoff_base_seconds = 1.0;
};

struct ChatMessage {
    std::string role;
    std::string content;
};
using Messages = std::vector<ChatMessage>;

struct ChatParams {
    double temperature = 0.0;
    int max_tokens = 3000;
    // Folded into the cache key so repeated samples of one prompt (e.g.
    // self-consistency draws) stay distinct entries.
    std::string cache_salt;
};

struct Usage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

struct ChatResult {
    std::string text;
    Usage usage;
    double cost_usd = 0.0;
    bool from_cache = false;
};

// Whitespace-piece estimator: ceil(pieces * 1.3). The live backend trusts
// provider-reported usage instead.
long long estimate_tokens(std::string_view text);
long long estimate_tokens(const Messages& messages);

// tokens/1000 x price, both directions, rounded half-even to 6 decimals.
double round_usd(double value);
double usage_cost(const ModelHandle& handle, const Usage& usage);

struct LedgerEntry {
    std::string role;
    std::string model_name;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    double cost_usd = 0.0;
};

// Thread-safe append-only record of real model spend. Cache hits never land
// here.
class CostLedger {
public:
    void add(LedgerEntry entry);
    std::vector<LedgerEntry> entries() const;

    struct Totals {
        long long calls = 0;
        long long prompt_tokens = 0;
        long long completion_tokens = 0;
        double cost_usd = 0.0;
    };
    std::map<std::string, Totals> totals_by_role() const;
    Totals grand_total() const;

private:
    mutable std::mutex mu_;
    std::vector<LedgerEntry> entries_;
};

struct CostReport {
    std::map<std::string, CostLedger::Totals> by_phase;  // diagnosis/synthesis/evaluation
    CostLedger::Totals pipeline_total;  // diagnosis + synthesis (the enhancement pipeline)
    CostLedger::Totals grand_total;
};

CostReport estimate_cost(const CostLedger& ledger);
// Aligned text table; reference estimates are printed alongside for
// comparison, never asserted.
std::string format_cost_report(const CostReport& report);

// Bounds concurrent in-flight live requests across all clients.
class RateLimiter {
public:
    explicit RateLimiter(int max_in_flight);
    void acquire();
    void release();

    class Scope {
    public:
        explicit Scope(RateLimiter* limiter) : limiter_(limiter) {
            if (limiter_) limiter_->acquire();
        }
        ~Scope() {
            if (limiter_) limiter_->release();
        }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        RateLimiter* limiter_;
    };

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResult chat(const Messages& messages, const ChatParams& params) = 0;
    virtual const ModelHandle& handle() const = 0;
};

// One canned-response rule. Rules with matchers fire whenever every substring
// appears in the request text and keep repeating their last completion once
// the sequence is consumed. Rules without matchers are positional: consumed
// once each, in order, by requests no matcher rule claims.
struct MockRule {
    std::vector<std::string> match;
    std::vector<std::string> completions;
    bool sample = false;  // draw uniformly (seeded) instead of sequentially
};

struct MockScript {
    std::vector<MockRule> rules;
    std::uint64_t seed = 0;

    static MockScript from_json(const nlohmann::json& j);
    static MockScript load_file(const std::string& path);
};

class MockClient : public ChatClient {
public:
    MockClient(ModelHandle handle, MockScript script, std::shared_ptr<CostLedger> ledger);

    ChatResult chat(const Messages& messages, const ChatParams& params) override;
    const ModelHandle& handle() const override { return handle_; }

private:
    ModelHandle handle_;
    MockScript script_;
    std::shared_ptr<CostLedger> ledger_;
    std::vector<std::size_t> consumed_;  // per-rule sequence position
    std::size_t next_positional_ = 0;
    std::mt19937_64 rng_;
    std::mutex mu_;
};

// OpenAI-compatible chat-completions backend with per-attempt timeout and
// exponential backoff on 429/5xx/transport errors.
class HttpClient : public ChatClient {
public:
    HttpClient(ModelHandle handle, std::shared_ptr<CostLedger> ledger,
               std::shared_ptr<RateLimiter> limiter = nullptr);

    ChatResult chat(const Messages& messages, const ChatParams& params) override;
    const ModelHandle& handle() const override { return handle_; }

private:
    ModelHandle handle_;
    std::shared_ptr<CostLedger> ledger_;
    std::shared_ptr<RateLimiter> limiter_;
    std::mt19937_64 jitter_rng_;
    std::mutex mu_;
};

std::unique_ptr<ChatClient> make_client(const ModelHandle& handle,
                                        std::shared_ptr<CostLedger> ledger,
                                        std::shared_ptr<RateLimiter> limiter = nullptr,
                                        const MockScript* script = nullptr);

} // namespace mars
