#include "sidequest/tools.hpp"

#include "sidequest/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace sidequest {

namespace {

bool is_word_token(std::string_view tok) {
    const auto c = static_cast<unsigned char>(tok.front());
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> word_terms(const Tokenizer& tok, std::string_view text) {
    std::vector<std::string> out;
    for (const auto& p : tok.split(text)) {
        const auto piece = text.substr(p.offset, p.length);
        if (is_word_token(piece)) out.push_back(lower(piece));
    }
    return out;
}

// Text covering tokens [first, last) of `text`.
std::string token_range(std::string_view text, const std::vector<TokenPiece>& pieces, std::size_t first,
                        std::size_t last) {
    if (first >= last || first >= pieces.size()) return {};
    last = std::min(last, pieces.size());
    const std::size_t begin = pieces[first].offset;
    const std::size_t end = pieces[last - 1].offset + pieces[last - 1].length;
    return std::string(text.substr(begin, end - begin));
}

} // namespace

// --- Corpus --------------------------------------------------------------

Corpus::Corpus(std::vector<Document> docs, std::shared_ptr<const Tokenizer> tokenizer)
    : docs_(std::move(docs)), tokenizer_(tokenizer ? std::move(tokenizer) : default_tokenizer()) {
    term_freq_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& d = docs_[i];
        if (!index_.emplace(d.doc_id, i).second) throw FormatError("duplicate doc_id '" + d.doc_id + "'");
        auto& tf = term_freq_.emplace_back();
        for (auto& t : word_terms(*tokenizer_, d.title)) ++tf[t];
        for (auto& t : word_terms(*tokenizer_, d.body)) ++tf[t];
    }
}

Corpus Corpus::from_jsonl(std::istream& in, std::shared_ptr<const Tokenizer> tokenizer) {
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            docs.push_back({j.at("doc_id").get<std::string>(), j.value("title", std::string{}),
                            j.value("body", std::string{})});
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Corpus(std::move(docs), std::move(tokenizer));
}

Corpus Corpus::load_file(const std::string& path, std::shared_ptr<const Tokenizer> tokenizer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open corpus " + path);
    return from_jsonl(in, std::move(tokenizer));
}

const Document* Corpus::find(const std::string& doc_id) const {
    const auto it = index_.find(doc_id);
    return it == index_.end() ? nullptr : &docs_[it->second];
}

std::size_t Corpus::score(std::size_t doc_index, const std::vector<std::string>& query_terms) const {
    const auto& tf = term_freq_.at(doc_index);
    std::size_t s = 0;
    for (const auto& t : query_terms) {
        const auto it = tf.find(t);
        if (it != tf.end()) s += it->second;
    }
    return s;
}

// --- tool calls ----------------------------------------------------------

std::optional<ToolCall> tool_call_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string()) return std::nullopt;
    const auto name = j["name"].get<std::string>();
    const nlohmann::json args = j.contains("args") ? j["args"] : (j.contains("arguments") ? j["arguments"] : nlohmann::json());
    ToolCall call;
    if (name == "search") {
        call.name = ToolName::search;
        if (args.is_string()) {
            call.query = args.get<std::string>();
        } else if (args.is_object() && args.contains("query") && args["query"].is_string()) {
            call.query = args["query"].get<std::string>();
        } else {
            return std::nullopt;
        }
        return call;
    }
    if (name == "open") {
        call.name = ToolName::open;
        if (args.is_string()) {
            call.doc_id = args.get<std::string>();
        } else if (args.is_object() && args.contains("doc_id") && args["doc_id"].is_string()) {
            call.doc_id = args["doc_id"].get<std::string>();
            if (args.contains("chunk") && !args["chunk"].is_null()) {
                if (!args["chunk"].is_number_integer()) return std::nullopt;
                call.chunk = args["chunk"].get<int>();
            }
        } else {
            return std::nullopt;
        }
        return call;
    }
    return std::nullopt;
}

nlohmann::json tool_call_to_json(const ToolCall& call) {
    nlohmann::ordered_json j;
    if (call.name == ToolName::search) {
        j["name"] = "search";
        j["args"] = {{"query", call.query}};
    } else {
        j["name"] = "open";
        nlohmann::ordered_json args;
        args["doc_id"] = call.doc_id;
        if (call.chunk) args["chunk"] = *call.chunk;
        j["args"] = args;
    }
    return nlohmann::json::parse(j.dump());
}

// --- search / open -------------------------------------------------------

std::vector<SearchHit> rank_documents(const Corpus& corpus, std::string_view query, std::size_t top_k) {
    if (corpus.empty()) throw EmptyCorpus("search on an empty corpus");
    auto terms = word_terms(corpus.tokenizer(), query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    std::vector<SearchHit> hits;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto s = corpus.score(i, terms);
        if (s > 0) hits.push_back({i, s});
    }
    const auto& docs = corpus.documents();
    std::sort(hits.begin(), hits.end(), [&](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return docs[a.doc_index].doc_id < docs[b.doc_index].doc_id;
    });
    if (hits.size() > top_k) hits.resize(top_k);
    return hits;
}

std::size_t chunk_count(const Corpus& corpus, const Document& doc, std::size_t chunk_tokens) {
    const std::size_t n = corpus.tokenizer().count(doc.body);
    if (n == 0 || chunk_tokens == 0) return 1;
    return (n + chunk_tokens - 1) / chunk_tokens;
}

std::string render_search(const Corpus& corpus, CursorId cursor, std::string_view query, const ToolConfig& cfg) {
    const auto hits = rank_documents(corpus, query, cfg.top_k);
    std::string out = cursor_tag(cursor) + " search: " + std::string(query) + "\n";
    if (hits.empty()) return out + "(no results)\n";
    std::size_t rank = 1;
    for (const auto& h : hits) {
        const auto& d = corpus.documents()[h.doc_index];
        const auto pieces = corpus.tokenizer().split(d.body);
        std::string snippet = token_range(d.body, pieces, 0, cfg.snippet_tokens);
        std::replace(snippet.begin(), snippet.end(), '\n', ' ');
        if (pieces.size() > cfg.snippet_tokens) snippet += " ...";
        out += std::to_string(rank++) + ". doc_id=" + d.doc_id + " | " + d.title + "\n   " + snippet + "\n";
    }
    return out;
}

std::string render_open(const Corpus& corpus, CursorId cursor, const std::string& doc_id, int chunk,
                        const ToolConfig& cfg) {
    const Document* d = corpus.find(doc_id);
    if (!d) throw UnknownDocument("unknown document '" + doc_id + "'");
    const std::size_t chunks = chunk_count(corpus, *d, cfg.chunk_tokens);
    if (chunk < 0 || static_cast<std::size_t>(chunk) >= chunks) {
        throw ChunkOutOfRange("chunk " + std::to_string(chunk) + " out of range for '" + doc_id + "' (" +
                              std::to_string(chunks) + " chunks)");
    }
    const auto pieces = corpus.tokenizer().split(d->body);
    const std::size_t per = cfg.chunk_tokens == 0 ? pieces.size() : cfg.chunk_tokens;
    const std::size_t first = static_cast<std::size_t>(chunk) * per;
    std::string out = cursor_tag(cursor) + " open: " + doc_id + " (chunk " + std::to_string(chunk + 1) + "/" +
                      std::to_string(chunks) + ") | " + d->title + "\n";
    out += token_range(d->body, pieces, first, first + per);
    out += "\n";
    return out;
}

// --- CorpusTools ---------------------------------------------------------

CorpusTools::CorpusTools(std::shared_ptr<const Corpus> corpus, ToolConfig config)
    : corpus_(std::move(corpus)), config_(config) {
    if (!corpus_) corpus_ = std::make_shared<const Corpus>();
}

CursorId CorpusTools::take_cursor() {
    std::lock_guard lock(mu_);
    return next_cursor_++;
}

ToolOutput CorpusTools::search(std::string_view query) {
    if (corpus_->empty()) throw EmptyCorpus("search on an empty corpus");
    const CursorId id = take_cursor();
    return {id, render_search(*corpus_, id, query, config_)};
}

ToolOutput CorpusTools::open(const std::string& doc_id, std::optional<int> chunk) {
    const Document* d = corpus_->find(doc_id);
    if (!d) throw UnknownDocument("unknown document '" + doc_id + "'");
    const int c = chunk.value_or(0);
    const std::size_t chunks = chunk_count(*corpus_, *d, config_.chunk_tokens);
    if (c < 0 || static_cast<std::size_t>(c) >= chunks) {
        throw ChunkOutOfRange("chunk " + std::to_string(c) + " out of range for '" + doc_id + "'");
    }
    const CursorId id = take_cursor();
    return {id, render_open(*corpus_, id, doc_id, c, config_)};
}

ToolOutput CorpusTools::execute(const ToolCall& call) {
    const CursorId id = take_cursor();
    try {
        if (call.name == ToolName::search) return {id, render_search(*corpus_, id, call.query, config_)};
        return {id, render_open(*corpus_, id, call.doc_id, call.chunk.value_or(0), config_)};
    } catch (const Error& e) {
        return {id, cursor_tag(id) + " error: " + e.what() + "\n"};
    }
}

void CorpusTools::reset() {
    std::lock_guard lock(mu_);
    next_cursor_ = 0;
}

} // namespace sidequest
