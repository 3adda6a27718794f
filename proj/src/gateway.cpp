#include "mars/gateway.hpp"

#include <algorithm>
#include <cfenv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#ifdef MARS_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "mars/text.hpp"

namespace mars {

Backend parse_backend(std::string_view s) {
    const std::string name = to_lower(trim(s));
    if (name == "http") return Backend::http;
    if (name == "mock") return Backend::mock;
    throw ValidationError("unknown backend: " + std::string(s));
}

std::string_view backend_name(Backend b) {
    return b == Backend::http ? "http" : "mock";
}

long long estimate_tokens(std::string_view text) {
    std::size_t pieces = split_whitespace(text).size();
    return static_cast<long long>(std::ceil(static_cast<double>(pieces) * 1.3));
}

long long estimate_tokens(const Messages& messages) {
    long long total = 0;
    for (const auto& m : messages) total += estimate_tokens(m.content);
    return total;
}

double round_usd(double value) {
    const int prev = std::fegetround();
    std::fesetround(FE_TONEAREST);
    double scaled = std::nearbyint(value * 1e6);
    std::fesetround(prev);
    return scaled / 1e6;
}

double usage_cost(const ModelHandle& handle, const Usage& usage) {
    double raw = static_cast<double>(usage.prompt_tokens) / 1000.0 * handle.price_per_1k_input +
                 static_cast<double>(usage.completion_tokens) / 1000.0 * handle.price_per_1k_output;
    return round_usd(raw);
}

void CostLedger::add(LedgerEntry entry) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(entry));
}

std::vector<LedgerEntry> CostLedger::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::map<std::string, CostLedger::Totals> CostLedger::totals_by_role() const {
    std::lock_guard lock(mu_);
    std::map<std::string, Totals> out;
    for (const auto& e : entries_) {
        auto& t = out[e.role];
        t.calls += 1;
        t.prompt_tokens += e.prompt_tokens;
        t.completion_tokens += e.completion_tokens;
        t.cost_usd += e.cost_usd;
    }
    for (auto& [role, t] : out) t.cost_usd = round_usd(t.cost_usd);
    return out;
}

CostLedger::Totals CostLedger::grand_total() const {
    Totals total;
    for (const auto& [role, t] : totals_by_role()) {
        total.calls += t.calls;
        total.prompt_tokens += t.prompt_tokens;
        total.completion_tokens += t.completion_tokens;
        total.cost_usd += t.cost_usd;
    }
    total.cost_usd = round_usd(total.cost_usd);
    return total;
}

namespace {

std::string phase_for_role(const std::string& role) {
    if (role == "analyzer") return "diagnosis";
    if (role == "synthesizer") return "synthesis";
    if (role == "evaluator") return "evaluation";
    return role;
}

void accumulate(CostLedger::Totals& into, const CostLedger::Totals& from) {
    into.calls += from.calls;
    into.prompt_tokens += from.prompt_tokens;
    into.completion_tokens += from.completion_tokens;
    into.cost_usd = round_usd(into.cost_usd + from.cost_usd);
}

} // namespace

CostReport estimate_cost(const CostLedger& ledger) {
    CostReport report;
    for (const auto& [role, totals] : ledger.totals_by_role()) {
        accumulate(report.by_phase[phase_for_role(role)], totals);
        accumulate(report.grand_total, totals);
    }
    for (const char* phase : {"diagnosis", "synthesis"}) {
        auto it = report.by_phase.find(phase);
        if (it != report.by_phase.end()) accumulate(report.pipeline_total, it->second);
    }
    return report;
}

std::string format_cost_report(const CostReport& report) {
    std::ostringstream os;
    os << "Cost report (actual spend; cache hits excluded)\n";
    auto line = [&os](const std::string& label, const CostLedger::Totals& t) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-12s %8lld calls %12lld tokens  $%.6f\n",
                      label.c_str(), t.calls, t.prompt_tokens + t.completion_tokens, t.cost_usd);
        os << buf;
    };
    for (const auto& [phase, totals] : report.by_phase) line(phase, totals);
    line("pipeline", report.pipeline_total);
    line("total", report.grand_total);
    os << "Reference estimates for a 1000-question run (gpt-3.5-turbo pricing):\n"
          "  diagnosis    ~200 calls     ~400K tokens  ~$0.40\n"
          "  synthesis     ~50 calls     ~150K tokens  ~$0.15\n"
          "  total        ~250 calls     ~550K tokens  ~$0.55\n";
    return os.str();
}

RateLimiter::RateLimiter(int max_in_flight) : available_(std::max(1, max_in_flight)) {}

void RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return available_ > 0; });
    --available_;
}

void RateLimiter::release() {
    {
        std::lock_guard lock(mu_);
        ++available_;
    }
    cv_.notify_one();
}

MockScript MockScript::from_json(const nlohmann::json& j) {
    MockScript script;
    if (!j.is_object()) throw ValidationError("mock script must be a JSON object");
    script.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("rules") || !j.at("rules").is_array())
        throw ValidationError("mock script needs a 'rules' array");
    for (const auto& rj : j.at("rules")) {
        MockRule rule;
        if (rj.contains("match")) {
            for (const auto& m : rj.at("match")) rule.match.push_back(m.get<std::string>());
        }
        if (rj.contains("completions")) {
            for (const auto& c : rj.at("completions")) rule.completions.push_back(c.get<std::string>());
        } else if (rj.contains("completion")) {
            rule.completions.push_back(rj.at("completion").get<std::string>());
        }
        if (rule.completions.empty())
            throw ValidationError("mock rule needs at least one completion");
        rule.sample = rj.value("sample", false);
        script.rules.push_back(std::move(rule));
    }
    return script;
}

MockScript MockScript::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open mock script: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("mock script " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

MockClient::MockClient(ModelHandle handle, MockScript script, std::shared_ptr<CostLedger> ledger)
    : handle_(std::move(handle)),
      script_(std::move(script)),
      ledger_(std::move(ledger)),
      consumed_(script_.rules.size(), 0),
      rng_(script_.seed) {}

ChatResult MockClient::chat(const Messages& messages, const ChatParams& params) {
    (void)params;
    std::string request_text;
    for (const auto& m : messages) {
        if (!request_text.empty()) request_text += "\n";
        request_text += m.content;
    }

    std::lock_guard lock(mu_);
    std::string completion;
    bool found = false;
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const auto& rule = script_.rules[i];
        if (rule.match.empty()) continue;
        bool all = std::all_of(rule.match.begin(), rule.match.end(), [&](const std::string& m) {
            return request_text.find(m) != std::string::npos;
        });
        if (!all) continue;
        if (rule.sample) {
            std::uniform_int_distribution<std::size_t> dist(0, rule.completions.size() - 1);
            completion = rule.completions[dist(rng_)];
        } else {
            std::size_t idx = std::min(consumed_[i], rule.completions.size() - 1);
            completion = rule.completions[idx];
            ++consumed_[i];
        }
        found = true;
        break;
    }
    if (!found) {
        // Positional fallback: unmatched requests drain matcher-less rules in
        // order, one completion per call.
        while (next_positional_ < script_.rules.size()) {
            const auto& rule = script_.rules[next_positional_];
            if (!rule.match.empty() || consumed_[next_positional_] >= rule.completions.size()) {
                ++next_positional_;
                continue;
            }
            completion = rule.completions[consumed_[next_positional_]++];
            found = true;
            break;
        }
    }
    if (!found) {
        throw MockExhausted("mock script has no rule for request starting with: " +
                            std::string(clip_utf8(request_text, 120)));
    }

    ChatResult result;
    result.text = completion;
    result.usage.prompt_tokens = estimate_tokens(messages);
    result.usage.completion_tokens = estimate_tokens(completion);
    result.cost_usd = usage_cost(handle_, result.usage);
    if (ledger_) {
        ledger_->add({handle_.role, handle_.model_name, result.usage.prompt_tokens,
                      result.usage.completion_tokens, result.cost_usd});
    }
    return result;
}

namespace {

// Split "https://host:port/base" into client target and path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = endpoint.find('/', host_start);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string base = endpoint.substr(0, path_start);
    std::string prefix = endpoint.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base, prefix};
}

} // namespace

HttpClient::HttpClient(ModelHandle handle, std::shared_ptr<CostLedger> ledger,
                       std::shared_ptr<RateLimiter> limiter)
    : handle_(std::move(handle)),
      ledger_(std::move(ledger)),
      limiter_(std::move(limiter)),
      jitter_rng_(std::random_device{}()) {
    if (handle_.endpoint.empty())
        throw ValidationError("http backend requires an endpoint (set MARS_API_BASE)");
}

ChatResult HttpClient::chat(const Messages& messages, const ChatParams& params) {
    nlohmann::json body{{"model", handle_.model_name},
                        {"temperature", params.temperature},
                        {"max_tokens", params.max_tokens}};
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages)
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const std::string payload = body.dump();

    auto [base, prefix] = split_endpoint(handle_.endpoint);
    const std::string path = prefix + "/chat/completions";

    std::string last_error = "no attempts made";
    bool saw_rate_limit = false;
    bool saw_timeout = false;
    const int attempts = std::max(1, handle_.max_retries + 1);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            double delay = handle_.backoff_base_seconds * std::pow(2.0, attempt - 1);
            {
                std::lock_guard lock(mu_);
                std::uniform_real_distribution<double> jitter(0.8, 1.2);
                delay *= jitter(jitter_rng_);
            }
            delay = std::min(delay, 30.0);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }

        RateLimiter::Scope scope(limiter_.get());
        httplib::Client client(base);
        client.set_connection_timeout(handle_.timeout_seconds, 0);
        client.set_read_timeout(handle_.timeout_seconds, 0);
        client.set_write_timeout(handle_.timeout_seconds, 0);
        if (!handle_.api_key.empty())
            client.set_default_headers({{"Authorization", "Bearer " + handle_.api_key}});

        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            auto err = res.error();
            saw_timeout = saw_timeout || err == httplib::Error::ConnectionTimeout ||
                          err == httplib::Error::Read || err == httplib::Error::Write;
            last_error = "transport error: " + httplib::to_string(err);
            continue;
        }
        if (res->status == 429) {
            saw_rate_limit = true;
            last_error = "HTTP 429: " + res->body;
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            continue;
        }
        if (res->status != 200) {
            throw ProviderError("HTTP " + std::to_string(res->status) + " from " + base + path +
                                ": " + std::string(clip_utf8(res->body, 400)));
        }

        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
            last_error = "unparseable completion body";
            continue;
        }
        ChatResult result;
        result.text = reply["choices"][0].value("message", nlohmann::json::object())
                          .value("content", "");
        if (reply.contains("usage")) {
            result.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0LL);
            result.usage.completion_tokens = reply["usage"].value("completion_tokens", 0LL);
        } else {
            result.usage.prompt_tokens = estimate_tokens(messages);
            result.usage.completion_tokens = estimate_tokens(result.text);
        }
        result.cost_usd = usage_cost(handle_, result.usage);
        if (ledger_) {
            ledger_->add({handle_.role, handle_.model_name, result.usage.prompt_tokens,
                          result.usage.completion_tokens, result.cost_usd});
        }
        return result;
    }

    std::string detail = handle_.model_name + " after " + std::to_string(attempts) +
                         " attempts; last: " + last_error;
    if (saw_rate_limit) throw RateLimited(detail);
    if (saw_timeout) throw Timeout(detail);
    throw ProviderError(detail);
}

std::unique_ptr<ChatClient> make_client(const ModelHandle& handle,
                                        std::shared_ptr<CostLedger> ledger,
                                        std::shared_ptr<RateLimiter> limiter,
                                        const MockScript* script) {
    if (handle.backend == Backend::mock) {
        return std::make_unique<MockClient>(handle, script ? *script : MockScript{},
                                            std::move(ledger));
    }
    return std::make_unique<HttpClient>(handle, std::move(ledger), std::move(limiter));
}

} // namespace mars
