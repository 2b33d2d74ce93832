#pragma once

#include "sidequest/command.hpp"
#include "sidequest/ledger.hpp"
#include "sidequest/tools.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sidequest {

inline constexpr std::string_view kDefaultTriggerPhrase = "** Memory management mode **";

enum class PolicyMode { main, aux };

struct PolicyRequest {
    LedgerView view;                     // generation sees only resident messages
    PolicyMode mode = PolicyMode::main;
    std::optional<std::string> trigger;  // set iff mode == aux
};

PolicyRequest main_request(LedgerView view);
PolicyRequest aux_request(LedgerView view, std::string trigger = std::string(kDefaultTriggerPhrase));

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    friend bool operator==(const TokenLogprob&, const TokenLogprob&) = default;
};
using PositionLogits = std::vector<TokenLogprob>;  // top-K alternatives at one position
using Logits = std::vector<PositionLogits>;

struct ToolCallParse {
    std::string thought;  // everything outside the tool block, trimmed
    ToolCall call;
    std::string block;    // the fenced block, verbatim
    friend bool operator==(const ToolCallParse&, const ToolCallParse&) = default;
};

struct FinalAnswerParse {
    std::string answer;
    friend bool operator==(const FinalAnswerParse&, const FinalAnswerParse&) = default;
};

struct Unparsable {
    std::string reason;
    friend bool operator==(const Unparsable&, const Unparsable&) = default;
};

using ParsedOutput = std::variant<ToolCallParse, FinalAnswerParse, EvictionCommand, Unparsable>;

struct PolicyOutput {
    std::string raw_text;
    ParsedOutput parsed;
    std::size_t gen_token_count = 0;
    std::optional<Logits> logits;
};

struct OutputGrammar {
    std::string final_marker = "FINAL:";
    std::string tool_fence = "```tool";
};

// Total: every string maps to some variant.
//   main: a line starting with the final marker -> FinalAnswer, otherwise
//         exactly one fenced tool block -> ToolCall, otherwise Unparsable.
//   aux:  the first {...} object holding a del_cursors list of
//         non-negative integers (strict JSON or unquoted keys) ->
//         EvictionCommand, otherwise Unparsable.
ParsedOutput parse_output(std::string_view raw_text, PolicyMode mode, const OutputGrammar& grammar = {});

// "```tool {...}```" for a call, as the text grammar expects it.
std::string render_tool_block(const ToolCall& call, const OutputGrammar& grammar = {});

// Deterministic stand-in for base-policy logits: for each token, the token
// itself followed by top_k-1 placeholder alternatives.
Logits synthetic_logits(const Tokenizer& tokenizer, std::string_view text, std::size_t top_k = 20);

class Policy {
public:
    virtual ~Policy() = default;
    // Must tolerate one main and one aux call in flight at the same time.
    // Throws PolicyUnavailable or PolicyTimeout.
    virtual PolicyOutput generate(const PolicyRequest& request) = 0;
};

PolicyOutput make_output(std::string raw_text, PolicyMode mode, const Tokenizer& tokenizer,
                         const OutputGrammar& grammar = {});

// Replays fixed responses: the n-th main call returns main[n], the n-th aux
// call returns aux[n]. Running past the end throws PolicyUnavailable.
class ScriptedPolicy final : public Policy {
public:
    ScriptedPolicy(std::vector<std::string> main_steps, std::vector<std::string> aux_steps = {},
                   std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer(), OutputGrammar grammar = {});

    PolicyOutput generate(const PolicyRequest& request) override;

    // Attach synthetic logits to main outputs.
    void set_synthetic_logits(std::optional<std::size_t> top_k) { logits_top_k_ = top_k; }
    void reset();
    std::size_t main_calls() const;
    std::size_t aux_calls() const;

private:
    std::vector<std::string> main_;
    std::vector<std::string> aux_;
    std::shared_ptr<const Tokenizer> tokenizer_;
    OutputGrammar grammar_;
    std::optional<std::size_t> logits_top_k_;
    mutable std::mutex mu_;
    std::size_t main_pos_ = 0;
    std::size_t aux_pos_ = 0;
};

// Computes each response from the request. Useful when an aux response has
// to look at its snapshot.
class CallbackPolicy final : public Policy {
public:
    using Responder = std::function<std::string(const PolicyRequest&, std::size_t call_index)>;

    CallbackPolicy(Responder main, Responder aux, std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer(),
                   OutputGrammar grammar = {});

    PolicyOutput generate(const PolicyRequest& request) override;

private:
    Responder main_;
    Responder aux_;
    std::shared_ptr<const Tokenizer> tokenizer_;
    OutputGrammar grammar_;
    std::mutex mu_;
    std::size_t main_calls_ = 0;
    std::size_t aux_calls_ = 0;
};

struct ChatEndpointConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model = "gpt-oss-20b";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 300;
    int max_tokens = 4096;
    std::optional<double> temperature;
    std::optional<std::uint64_t> seed;
};

// Minimal OpenAI-compatible /chat/completions client.
class ChatClient {
public:
    explicit ChatClient(ChatEndpointConfig config);
    ~ChatClient();
    ChatClient(const ChatClient&) = delete;
    ChatClient& operator=(const ChatClient&) = delete;

    // Posts `body` (model/max_tokens filled in when absent) and returns the
    // decoded response. Throws PolicyUnavailable / PolicyTimeout.
    nlohmann::json complete(nlohmann::json body) const;
    const ChatEndpointConfig& config() const { return config_; }

private:
    ChatEndpointConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

struct HttpPolicyConfig {
    ChatEndpointConfig endpoint;
    bool use_function_calling = true;
    std::optional<int> top_logprobs;  // request logprobs when set
    std::string system_prompt;        // empty -> built-in browsing prompt
};

std::string default_system_prompt(const OutputGrammar& grammar = {});

// Live backend. Resident messages are sent as chat history; tool calls come
// back through function calling when the endpoint supports it and are
// normalized to the fenced text grammar.
class HttpPolicy final : public Policy {
public:
    explicit HttpPolicy(HttpPolicyConfig config, std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer(),
                        OutputGrammar grammar = {});

    PolicyOutput generate(const PolicyRequest& request) override;

    nlohmann::json build_request(const PolicyRequest& request) const;

private:
    HttpPolicyConfig config_;
    ChatClient client_;
    std::shared_ptr<const Tokenizer> tokenizer_;
    OutputGrammar grammar_;
};

} // namespace sidequest
