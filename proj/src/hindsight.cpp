#include "sidequest/hindsight.hpp"

#include "sidequest/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace sidequest {

namespace {

bool counts_as_use(Role role) {
    return role == Role::assistant || role == Role::tool_call || role == Role::final_answer;
}

bool contains(std::span<const CursorId> ids, CursorId id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); }

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::vector<TraceCursor> trace_cursors(const Trace& trace) {
    std::vector<TraceCursor> out;
    for (std::size_t i = 0; i < trace.messages.size(); ++i) {
        const Message& m = trace.messages[i];
        if (!m.cursor_id) continue;
        TraceCursor c;
        c.id = *m.cursor_id;
        c.opened_turn = m.turn;
        c.response_index = i;
        c.span = m.span;
        if (i > 0 && trace.messages[i - 1].role == Role::tool_call && trace.messages[i - 1].turn == m.turn) {
            c.call_index = i - 1;
            c.span = {trace.messages[i - 1].span.start, trace.messages[i - 1].span.len + m.span.len};
        }
        out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const TraceCursor& a, const TraceCursor& b) { return a.id < b.id; });
    return out;
}

std::map<CursorId, int> last_use_indices(const Trace& trace) {
    std::map<CursorId, int> last;
    for (const auto& c : trace_cursors(trace)) last[c.id] = c.opened_turn;
    for (const auto& m : trace.messages) {
        if (!counts_as_use(m.role)) continue;
        for (CursorId id : cited_cursors(m.text)) {
            auto it = last.find(id);
            if (it != last.end()) it->second = std::max(it->second, m.turn);
        }
    }
    return last;
}

int last_use_index(const Trace& trace, CursorId cursor) {
    const auto all = last_use_indices(trace);
    const auto it = all.find(cursor);
    if (it == all.end()) throw std::out_of_range("cursor " + std::to_string(cursor) + " not in trace");
    return it->second;
}

std::vector<CursorId> expired_at(const Trace& trace, int t) {
    std::vector<CursorId> out;
    for (const auto& [id, last] : last_use_indices(trace))
        if (last < t) out.push_back(id);
    return out;
}

CursorPartition partition_expired(std::span<const CursorId> expired, std::uint64_t seed) {
    std::vector<CursorId> ids(expired.begin(), expired.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::mt19937_64 rng(seed);
    CursorPartition p;
    for (CursorId id : ids) ((rng() >> 63) ? p.open : p.closed).push_back(id);
    return p;
}

std::uint64_t partition_seed(std::uint64_t seed, const std::string& trace_id, int t) {
    return splitmix64(splitmix64(seed ^ fnv1a(trace_id)) + static_cast<std::uint64_t>(t));
}

std::size_t prefix_length(const Trace& trace, int t) {
    for (std::size_t i = 0; i < trace.messages.size(); ++i) {
        const Message& m = trace.messages[i];
        if (m.role != Role::user && m.turn >= t) return i;
    }
    return trace.messages.size();
}

MaskSpec build_mask(const Trace& trace, int t, std::span<const CursorId> closed) {
    const auto cursors = trace_cursors(trace);
    MaskSpec mask;
    for (CursorId id : closed) {
        const auto it = std::find_if(cursors.begin(), cursors.end(), [&](const TraceCursor& c) { return c.id == id; });
        if (it == cursors.end() || it->opened_turn >= t) {
            throw InvalidMaskTarget("cursor " + std::to_string(id) + " was not opened before turn " + std::to_string(t));
        }
        mask.masked.push_back(it->span);
    }
    std::sort(mask.masked.begin(), mask.masked.end(),
              [](const TokenSpan& a, const TokenSpan& b) { return a.start < b.start; });
    mask.masked.erase(std::unique(mask.masked.begin(), mask.masked.end()), mask.masked.end());
    return mask;
}

// --- annotation ----------------------------------------------------------

std::string format_id_list(std::span<const CursorId> ids) {
    std::string out = "[";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(ids[i]);
    }
    return out + "]";
}

std::string format_conversation(const Trace& trace, std::size_t prefix_len, std::span<const CursorId> hidden) {
    std::set<std::size_t> skip;
    for (const auto& c : trace_cursors(trace)) {
        if (!contains(hidden, c.id)) continue;
        skip.insert(c.response_index);
        if (c.call_index) skip.insert(*c.call_index);
    }
    std::string out;
    for (std::size_t i = 0; i < prefix_len && i < trace.messages.size(); ++i) {
        if (skip.count(i)) continue;
        const Message& m = trace.messages[i];
        if (!out.empty()) out += "\n";
        out += "[" + std::string(to_string(m.role)) + " | turn " + std::to_string(m.turn) + "]\n" + m.text;
        if (!m.text.empty() && m.text.back() != '\n') out += "\n";
    }
    return out;
}

std::string fill_annotation_prompt(const AnnotationRequest& r) {
    std::string out = annotation_prompt_template();
    const std::pair<std::string, std::string> slots[] = {
        {"{formatted_conv}", r.formatted_conv},
        {"{open_cursor_ids}", format_id_list(r.open_cursor_ids)},
        {"{del_cursor_ids}", format_id_list(r.del_cursor_ids)},
        {"{cursors_final}", format_id_list(r.cursors_final)},
    };
    // Single left-to-right pass so slot-like text inside the conversation is
    // never substituted again.
    std::string result;
    std::size_t pos = 0;
    while (pos < out.size()) {
        bool matched = false;
        if (out[pos] == '{') {
            for (const auto& [key, value] : slots) {
                if (out.compare(pos, key.size(), key) == 0) {
                    result += value;
                    pos += key.size();
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) result += out[pos++];
    }
    return result;
}

std::string HindsightAnnotator::annotate(const AnnotationRequest& r) {
    std::vector<CursorId> useful;
    for (CursorId id : r.open_cursor_ids)
        if (!contains(r.del_cursor_ids, id)) useful.push_back(id);

    std::string reasoning = "Open cursors: " + format_id_list(r.open_cursor_ids) + ". ";
    for (CursorId id : useful) {
        reasoning += cursor_tag(id) +
                     (contains(r.cursors_final, id) ? " backs the answer and will be cited. "
                                                    : " is still relevant to the next steps. ");
    }
    for (CursorId id : r.del_cursor_ids)
        reasoning += cursor_tag(id) + " has served its purpose and is not needed again. ";
    if (r.del_cursor_ids.empty()) reasoning += "Nothing can be removed yet.";
    else reasoning += "Remove " + format_id_list(r.del_cursor_ids) + ".";

    nlohmann::ordered_json j;
    j["reasoning"] = reasoning;
    j["useful_cursors"] = useful;
    j["removable_cursors"] = r.del_cursor_ids;
    return j.dump();
}

ChatAnnotator::ChatAnnotator(ChatEndpointConfig config) : client_(std::move(config)) {}

std::string ChatAnnotator::annotate(const AnnotationRequest& r) {
    nlohmann::json body = {{"messages", nlohmann::json::array({{{"role", "user"}, {"content", r.prompt}}})}};
    const auto response = client_.complete(std::move(body));
    try {
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw SampleRejected("annotator response has no message content");
    }
}

Annotation parse_annotation(std::string_view raw) {
    for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
        for (std::size_t close = raw.rfind('}'); close != std::string_view::npos && close > open;
             close = raw.rfind('}', close - 1)) {
            const auto j = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
            if (j.is_discarded() || !j.is_object()) continue;
            if (!j.contains("reasoning") || !j["reasoning"].is_string() || !j.contains("removable_cursors") ||
                !j["removable_cursors"].is_array()) {
                break;
            }
            Annotation a;
            a.reasoning = j["reasoning"].get<std::string>();
            try {
                a.removable_cursors = j["removable_cursors"].get<std::vector<CursorId>>();
                if (j.contains("useful_cursors")) a.useful_cursors = j["useful_cursors"].get<std::vector<CursorId>>();
            } catch (const nlohmann::json::exception&) {
                throw SampleRejected("cursor lists must hold integers");
            }
            return a;
        }
    }
    throw SampleRejected("no valid annotation object in annotator output");
}

// --- samples -------------------------------------------------------------

namespace {

std::vector<Segment> prefix_segments(const Trace& trace, std::size_t prefix_len) {
    std::vector<Segment> out;
    for (std::size_t i = 0; i < prefix_len && i < trace.messages.size(); ++i) {
        const Message& m = trace.messages[i];
        out.push_back({std::string(to_string(m.role)), m.text, m.span.start, m.span.len});
    }
    return out;
}

std::size_t sequence_end(const std::vector<Segment>& segs) { return segs.empty() ? 0 : segs.back().start + segs.back().len; }

} // namespace

TrainingSample synthesize_aux_trace(const Trace& trace, int t, const CursorPartition& partition,
                                    Annotator& annotator, const Tokenizer& tokenizer, const SynthesisConfig& config) {
    for (CursorId id : partition.open) {
        if (contains(partition.closed, id)) throw SampleRejected("cursor in both open and closed sets");
    }
    const std::size_t plen = prefix_length(trace, t);
    MaskSpec mask = build_mask(trace, t, partition.closed);

    AnnotationRequest req;
    req.trace_id = trace.trace_id;
    req.turn = t;
    req.formatted_conv = format_conversation(trace, plen, partition.closed);
    for (const auto& c : trace_cursors(trace)) {
        if (c.opened_turn < t && !contains(partition.closed, c.id)) req.open_cursor_ids.push_back(c.id);
    }
    req.del_cursor_ids = partition.open;
    std::sort(req.del_cursor_ids.begin(), req.del_cursor_ids.end());
    req.cursors_final = trace.final_citations;
    req.prompt = fill_annotation_prompt(req);

    const Annotation ann = parse_annotation(annotator.annotate(req));
    std::vector<CursorId> removable = ann.removable_cursors;
    std::sort(removable.begin(), removable.end());
    removable.erase(std::unique(removable.begin(), removable.end()), removable.end());
    for (CursorId id : removable) {
        if (contains(trace.final_citations, id)) {
            throw SampleRejected("annotator removes cursor " + std::to_string(id) + " cited in the final answer");
        }
    }
    if (removable != req.del_cursor_ids) {
        throw SampleRejected("annotator removable " + format_id_list(removable) + " != target " +
                             format_id_list(req.del_cursor_ids));
    }

    TrainingSample s;
    s.kind = SampleKind::aux;
    s.tokens = prefix_segments(trace, plen);
    s.mask = std::move(mask);
    s.lambda_weight = config.aux_weight;
    s.source_trace_id = trace.trace_id;
    s.turn = t;
    s.command = EvictionCommand{removable};

    const std::string reasoning = config.trigger + "\n" + ann.reasoning;
    std::size_t pos = sequence_end(s.tokens);
    const std::size_t rlen = tokenizer.count(reasoning);
    s.tokens.push_back({"aux_reasoning", reasoning, pos, rlen});
    pos += rlen;
    const std::string close = render_command(s.command);
    s.tokens.push_back({"aux_command", close, pos, tokenizer.count(close)});
    return s;
}

std::optional<Logits> SyntheticLogitsSource::logits_for(const Trace& trace) {
    Logits out;
    for (const auto& m : trace.messages) {
        auto part = synthetic_logits(*tokenizer_, m.text, top_k_);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

DatasetResult build_dataset(const std::vector<Trace>& traces, const std::map<std::string, bool>& verdicts,
                            Annotator& annotator, LogitsSource* logits, const DatasetConfig& config,
                            const Tokenizer& tokenizer) {
    if (config.interval < 1) throw ConfigError("interval must be >= 1");
    DatasetResult result;
    const SynthesisConfig synth{config.trigger, config.aux_weight};
    for (const Trace& trace : traces) {
        const auto v = verdicts.find(trace.trace_id);
        const bool correct = v != verdicts.end() ? v->second : trace.correct.value_or(false);
        if (!correct) {
            ++result.skipped_incorrect;
            continue;
        }

        TrainingSample main;
        main.kind = SampleKind::main;
        main.tokens = prefix_segments(trace, trace.messages.size());
        main.lambda_weight = config.lambda_weight;
        main.source_trace_id = trace.trace_id;
        if (logits) main.logits = logits->logits_for(trace);
        result.samples.push_back(std::move(main));
        ++result.main_count;

        const int last = trace.final_turn();
        for (int t = 0; t <= last; t += config.interval) {
            const auto expired = expired_at(trace, t);
            const auto part = partition_expired(expired, partition_seed(config.seed, trace.trace_id, t));
            try {
                result.samples.push_back(synthesize_aux_trace(trace, t, part, annotator, tokenizer, synth));
                ++result.aux_count;
            } catch (const SampleRejected& e) {
                ++result.rejected;
                result.rejections.push_back(trace.trace_id + "@" + std::to_string(t) + ": " + e.what());
            }
        }
    }
    return result;
}

std::string sample_to_json(const TrainingSample& s) {
    nlohmann::ordered_json j;
    j["kind"] = s.kind == SampleKind::main ? "main" : "aux";
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (const auto& seg : s.tokens) {
        nlohmann::ordered_json o;
        o["role"] = seg.role;
        o["text"] = seg.text;
        o["start"] = seg.start;
        o["len"] = seg.len;
        tokens.push_back(std::move(o));
    }
    j["tokens"] = std::move(tokens);
    nlohmann::ordered_json spans = nlohmann::ordered_json::array();
    for (const auto& sp : s.mask.masked) spans.push_back({sp.start, sp.len});
    j["mask_spans"] = std::move(spans);
    if (s.kind == SampleKind::main) {
        if (s.logits) {
            nlohmann::ordered_json positions = nlohmann::ordered_json::array();
            for (const auto& pos : *s.logits) {
                nlohmann::ordered_json alts = nlohmann::ordered_json::array();
                for (const auto& a : pos) alts.push_back({{"token", a.token}, {"logprob", a.logprob}});
                positions.push_back(std::move(alts));
            }
            j["logits"] = std::move(positions);
        } else {
            j["logits"] = nullptr;
        }
    }
    j["lambda_weight"] = s.lambda_weight;
    j["source_trace_id"] = s.source_trace_id;
    j["turn"] = s.turn ? nlohmann::ordered_json(*s.turn) : nlohmann::ordered_json(nullptr);
    return j.dump();
}

void write_dataset(std::ostream& out, const DatasetResult& result, int main_upsample) {
    const int copies = std::max(1, main_upsample);
    for (const auto& s : result.samples) {
        const std::string line = sample_to_json(s);
        const int n = s.kind == SampleKind::main ? copies : 1;
        for (int i = 0; i < n; ++i) out << line << '\n';
    }
}

std::string dataset_manifest(const DatasetResult& result, const DatasetConfig& config) {
    nlohmann::ordered_json j;
    j["main"] = result.main_count;
    j["aux"] = result.aux_count;
    j["rejected"] = result.rejected;
    j["skipped_incorrect"] = result.skipped_incorrect;
    j["main_upsample"] = config.main_upsample;
    j["main_lines"] = result.main_count * static_cast<std::size_t>(std::max(1, config.main_upsample));
    j["interval"] = config.interval;
    j["seed"] = config.seed;
    j["trigger"] = config.trigger;
    j["lambda_weight"] = config.lambda_weight;
    j["training"] = {{"lora_rank", 8}, {"lora_alpha", 16}, {"learning_rate", 2e-4}, {"epochs", 3}};
    j["rejections"] = result.rejections;
    return j.dump(2) + "\n";
}

} // namespace sidequest
