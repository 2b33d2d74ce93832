#include "sidequest/policy.hpp"

#include "sidequest/error.hpp"

#include "httplib.h"

#include <cstdlib>

namespace sidequest {

namespace {

// Splits "https://host:port/v1" into "https://host:port" and "/v1".
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const std::size_t host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_begin = url.find('/', host_begin);
    if (path_begin == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_begin);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_begin), prefix};
}

nlohmann::json tool_schemas() {
    return nlohmann::json::parse(R"([
      {"type": "function", "function": {
         "name": "search",
         "description": "Search the document collection. Returns a numbered hit list.",
         "parameters": {"type": "object",
                        "properties": {"query": {"type": "string"}},
                        "required": ["query"]}}},
      {"type": "function", "function": {
         "name": "open",
         "description": "Open a document by doc_id, optionally a later chunk.",
         "parameters": {"type": "object",
                        "properties": {"doc_id": {"type": "string"}, "chunk": {"type": "integer"}},
                        "required": ["doc_id"]}}}
    ])");
}

std::string chat_role(Role role) {
    switch (role) {
    case Role::user:
    case Role::tool_response: return "user";
    default: return "assistant";
    }
}

} // namespace

// --- ChatClient ----------------------------------------------------------

ChatClient::ChatClient(ChatEndpointConfig config) : config_(std::move(config)) {
    std::tie(scheme_host_port_, path_prefix_) = split_base_url(config_.base_url);
}

ChatClient::~ChatClient() = default;

nlohmann::json ChatClient::complete(nlohmann::json body) const {
    if (!body.contains("model")) body["model"] = config_.model;
    if (!body.contains("max_tokens")) body["max_tokens"] = config_.max_tokens;
    if (config_.temperature && !body.contains("temperature")) body["temperature"] = *config_.temperature;
    if (config_.seed && !body.contains("seed")) body["seed"] = *config_.seed;

    httplib::Client cli(scheme_host_port_);
    if (!cli.is_valid()) throw PolicyUnavailable("unsupported endpoint URL " + config_.base_url);
    cli.set_connection_timeout(std::min(config_.timeout_seconds, 30), 0);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    cli.set_write_timeout(config_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    auto res = cli.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        const std::string what = "chat completion failed: " + httplib::to_string(err);
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) throw PolicyTimeout(what);
        throw PolicyUnavailable(what);
    }
    if (res->status != 200) {
        throw PolicyUnavailable("chat completion returned HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 500));
    }
    auto json = nlohmann::json::parse(res->body, nullptr, false);
    if (json.is_discarded()) throw PolicyUnavailable("chat completion returned invalid JSON");
    return json;
}

// --- HttpPolicy ----------------------------------------------------------

std::string default_system_prompt(const OutputGrammar& g) {
    return "You are a research assistant with a browser tool. Every tool output is labelled with a "
           "cursor such as [Cursor 0]; refer to sources by their cursor tag.\n"
           "To call a tool, emit exactly one block:\n" +
           g.tool_fence +
           " {\"name\": \"search\", \"args\": {\"query\": \"...\"}}```\n"
           "or\n" +
           g.tool_fence +
           " {\"name\": \"open\", \"args\": {\"doc_id\": \"...\", \"chunk\": 0}}```\n"
           "When you know the answer, write a line starting with \"" +
           g.final_marker +
           "\" followed by the answer and the cursor tags you relied on.\n"
           "If a message says \"" +
           std::string(kDefaultTriggerPhrase) +
           "\", do not continue the task: reason about which open cursors are no longer useful and reply "
           "with {\"del_cursors\": [ids]}.";
}

HttpPolicy::HttpPolicy(HttpPolicyConfig config, std::shared_ptr<const Tokenizer> tokenizer, OutputGrammar grammar)
    : config_(std::move(config)),
      client_(config_.endpoint),
      tokenizer_(tokenizer ? std::move(tokenizer) : default_tokenizer()),
      grammar_(std::move(grammar)) {}

nlohmann::json HttpPolicy::build_request(const PolicyRequest& request) const {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"},
                        {"content", config_.system_prompt.empty() ? default_system_prompt(grammar_) : config_.system_prompt}});
    for (const Message* m : request.view.resident_messages()) {
        const std::string role = chat_role(m->role);
        if (!messages.empty() && messages.back()["role"] == role && role != "system") {
            messages.back()["content"] = messages.back()["content"].get<std::string>() + "\n" + m->text;
        } else {
            messages.push_back({{"role", role}, {"content", m->text}});
        }
    }
    if (request.mode == PolicyMode::aux) {
        messages.push_back({{"role", "user"}, {"content", request.trigger.value_or(std::string(kDefaultTriggerPhrase))}});
    }
    nlohmann::json body = {{"messages", messages}};
    if (request.mode == PolicyMode::main && config_.use_function_calling) body["tools"] = tool_schemas();
    if (config_.top_logprobs) {
        body["logprobs"] = true;
        body["top_logprobs"] = *config_.top_logprobs;
    }
    return body;
}

PolicyOutput HttpPolicy::generate(const PolicyRequest& request) {
    const auto response = client_.complete(build_request(request));
    if (!response.contains("choices") || !response["choices"].is_array() || response["choices"].empty()) {
        throw PolicyUnavailable("chat completion has no choices");
    }
    const auto& msg = response["choices"][0].value("message", nlohmann::json::object());
    std::string text = msg.contains("content") && msg["content"].is_string() ? msg["content"].get<std::string>() : "";

    if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
        const auto& fn = msg["tool_calls"][0].value("function", nlohmann::json::object());
        nlohmann::json call_json = {{"name", fn.value("name", std::string{})}};
        const auto args_text = fn.value("arguments", std::string("{}"));
        call_json["args"] = nlohmann::json::parse(args_text, nullptr, false);
        if (auto call = tool_call_from_json(call_json)) {
            if (!text.empty()) text += "\n";
            text += render_tool_block(*call, grammar_);
        } else {
            // Keep the raw call so the parse reports it as unparsable.
            if (!text.empty()) text += "\n";
            text += grammar_.tool_fence + " " + call_json.dump() + "```";
        }
    }

    auto out = make_output(std::move(text), request.mode, *tokenizer_, grammar_);
    const auto& choice = response["choices"][0];
    if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
        choice["logprobs"]["content"].is_array()) {
        Logits logits;
        for (const auto& pos : choice["logprobs"]["content"]) {
            PositionLogits p;
            if (pos.contains("top_logprobs") && pos["top_logprobs"].is_array()) {
                for (const auto& alt : pos["top_logprobs"]) {
                    p.push_back({alt.value("token", std::string{}), alt.value("logprob", 0.0)});
                }
            } else {
                p.push_back({pos.value("token", std::string{}), pos.value("logprob", 0.0)});
            }
            logits.push_back(std::move(p));
        }
        out.logits = std::move(logits);
    }
    return out;
}

} // namespace sidequest
