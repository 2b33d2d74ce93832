#include "sidequest/policy.hpp"

#include "sidequest/error.hpp"

#include <cctype>
#include <limits>
#include <functional>
#include <regex>

namespace sidequest {

PolicyRequest main_request(LedgerView view) { return {std::move(view), PolicyMode::main, std::nullopt}; }

PolicyRequest aux_request(LedgerView view, std::string trigger) {
    return {std::move(view), PolicyMode::aux, std::move(trigger)};
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Position of a line that starts (after indentation) with `marker`.
std::optional<std::size_t> find_marker_line(std::string_view text, std::string_view marker) {
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t i = line_start;
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
        if (text.substr(i, marker.size()) == marker) return i;
        const auto nl = text.find('\n', line_start);
        if (nl == std::string_view::npos) break;
        line_start = nl + 1;
    }
    return std::nullopt;
}

ParsedOutput parse_main(std::string_view raw, const OutputGrammar& g) {
    if (const auto pos = find_marker_line(raw, g.final_marker)) {
        return FinalAnswerParse{std::string(trim(raw.substr(*pos + g.final_marker.size())))};
    }

    struct Block {
        std::size_t begin, end, content_begin, content_end;
    };
    std::vector<Block> blocks;
    std::size_t search = 0;
    while ((search = raw.find(g.tool_fence, search)) != std::string_view::npos) {
        const std::size_t content_begin = search + g.tool_fence.size();
        const std::size_t close = raw.find("```", content_begin);
        if (close == std::string_view::npos) return Unparsable{"unterminated tool block"};
        blocks.push_back({search, close + 3, content_begin, close});
        search = close + 3;
    }
    if (blocks.empty()) return Unparsable{"no tool call or final answer"};
    if (blocks.size() > 1) return Unparsable{"more than one tool call"};

    const Block& b = blocks.front();
    const auto json = nlohmann::json::parse(raw.substr(b.content_begin, b.content_end - b.content_begin), nullptr, false);
    if (json.is_discarded()) return Unparsable{"tool block is not valid JSON"};
    auto call = tool_call_from_json(json);
    if (!call) return Unparsable{"tool block does not name a known tool with valid args"};

    const auto before = trim(raw.substr(0, b.begin));
    const auto after = trim(raw.substr(b.end));
    std::string thought(before);
    if (!after.empty()) {
        if (!thought.empty()) thought += '\n';
        thought += after;
    }
    return ToolCallParse{std::move(thought), std::move(*call), std::string(raw.substr(b.begin, b.end - b.begin))};
}

// Index one past the '}' matching the '{' at `open`, or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

std::optional<EvictionCommand> command_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("del_cursors")) return std::nullopt;
    const auto& list = j["del_cursors"];
    if (!list.is_array()) return std::nullopt;
    EvictionCommand cmd;
    for (const auto& v : list) {
        if (!v.is_number_integer()) return std::nullopt;
        const auto id = v.get<long long>();
        if (id < 0 || id > std::numeric_limits<CursorId>::max()) return std::nullopt;
        cmd.cursor_ids.push_back(static_cast<CursorId>(id));
    }
    return cmd;
}

std::optional<EvictionCommand> try_command(std::string_view candidate) {
    auto strict = nlohmann::json::parse(candidate, nullptr, false);
    if (!strict.is_discarded()) return command_from_json(strict);
    static const std::regex bare_key(R"(([{,]\s*)([A-Za-z_][A-Za-z0-9_]*)\s*:)");
    const std::string quoted = std::regex_replace(std::string(candidate), bare_key, "$1\"$2\":");
    auto relaxed = nlohmann::json::parse(quoted, nullptr, false);
    if (!relaxed.is_discarded()) return command_from_json(relaxed);
    return std::nullopt;
}

ParsedOutput parse_aux(std::string_view raw) {
    for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
        const std::size_t close = match_brace(raw, open);
        if (close == std::string_view::npos) continue;
        if (auto cmd = try_command(raw.substr(open, close - open))) return *cmd;
    }
    return Unparsable{"no del_cursors command"};
}

} // namespace

ParsedOutput parse_output(std::string_view raw_text, PolicyMode mode, const OutputGrammar& grammar) {
    return mode == PolicyMode::aux ? parse_aux(raw_text) : parse_main(raw_text, grammar);
}

std::string render_tool_block(const ToolCall& call, const OutputGrammar& grammar) {
    return grammar.tool_fence + " " + tool_call_to_json(call).dump() + "```";
}

Logits synthetic_logits(const Tokenizer& tokenizer, std::string_view text, std::size_t top_k) {
    Logits out;
    if (top_k == 0) return out;
    for (const auto& piece : tokenizer.split(text)) {
        const std::string tok(text.substr(piece.offset, piece.length));
        const auto h = std::hash<std::string>{}(tok);
        PositionLogits pos;
        pos.push_back({tok, -0.05});
        for (std::size_t k = 1; k < top_k; ++k) {
            pos.push_back({"<alt" + std::to_string((h + k) % 50000) + ">", -3.0 - static_cast<double>(k)});
        }
        out.push_back(std::move(pos));
    }
    return out;
}

PolicyOutput make_output(std::string raw_text, PolicyMode mode, const Tokenizer& tokenizer,
                         const OutputGrammar& grammar) {
    PolicyOutput out;
    out.parsed = parse_output(raw_text, mode, grammar);
    out.gen_token_count = tokenizer.count(raw_text);
    out.raw_text = std::move(raw_text);
    return out;
}

// --- ScriptedPolicy ------------------------------------------------------

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> main_steps, std::vector<std::string> aux_steps,
                               std::shared_ptr<const Tokenizer> tokenizer, OutputGrammar grammar)
    : main_(std::move(main_steps)),
      aux_(std::move(aux_steps)),
      tokenizer_(tokenizer ? std::move(tokenizer) : default_tokenizer()),
      grammar_(std::move(grammar)) {}

PolicyOutput ScriptedPolicy::generate(const PolicyRequest& request) {
    std::string text;
    {
        std::lock_guard lock(mu_);
        auto& steps = request.mode == PolicyMode::main ? main_ : aux_;
        auto& pos = request.mode == PolicyMode::main ? main_pos_ : aux_pos_;
        if (pos >= steps.size()) {
            throw PolicyUnavailable(std::string(request.mode == PolicyMode::main ? "main" : "aux") +
                                    " script exhausted after " + std::to_string(steps.size()) + " steps");
        }
        text = steps[pos++];
    }
    auto out = make_output(std::move(text), request.mode, *tokenizer_, grammar_);
    if (request.mode == PolicyMode::main && logits_top_k_) {
        out.logits = synthetic_logits(*tokenizer_, out.raw_text, *logits_top_k_);
    }
    return out;
}

void ScriptedPolicy::reset() {
    std::lock_guard lock(mu_);
    main_pos_ = aux_pos_ = 0;
}

std::size_t ScriptedPolicy::main_calls() const {
    std::lock_guard lock(mu_);
    return main_pos_;
}

std::size_t ScriptedPolicy::aux_calls() const {
    std::lock_guard lock(mu_);
    return aux_pos_;
}

// --- CallbackPolicy ------------------------------------------------------

CallbackPolicy::CallbackPolicy(Responder main, Responder aux, std::shared_ptr<const Tokenizer> tokenizer,
                               OutputGrammar grammar)
    : main_(std::move(main)),
      aux_(std::move(aux)),
      tokenizer_(tokenizer ? std::move(tokenizer) : default_tokenizer()),
      grammar_(std::move(grammar)) {}

PolicyOutput CallbackPolicy::generate(const PolicyRequest& request) {
    std::size_t index = 0;
    {
        std::lock_guard lock(mu_);
        index = request.mode == PolicyMode::main ? main_calls_++ : aux_calls_++;
    }
    const Responder& fn = request.mode == PolicyMode::main ? main_ : aux_;
    if (!fn) throw PolicyUnavailable("no responder for this mode");
    return make_output(fn(request, index), request.mode, *tokenizer_, grammar_);
}

} // namespace sidequest
