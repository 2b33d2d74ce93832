#pragma once

#include "sidequest/ledger.hpp"
#include "sidequest/tokenizer.hpp"

#include "json.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace sidequest {

struct Document {
    std::string doc_id;
    std::string title;
    std::string body;
};

// Read-only document collection with precomputed term frequencies.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Document> docs, std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());

    static Corpus from_jsonl(std::istream& in, std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());
    static Corpus load_file(const std::string& path, std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());

    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    const Document* find(const std::string& doc_id) const;
    const std::vector<Document>& documents() const { return docs_; }
    const Tokenizer& tokenizer() const { return *tokenizer_; }

    // Term-frequency overlap between the query's distinct word terms and the
    // document's title+body, case-insensitive.
    std::size_t score(std::size_t doc_index, const std::vector<std::string>& query_terms) const;

private:
    std::vector<Document> docs_;
    std::vector<std::unordered_map<std::string, std::size_t>> term_freq_;
    std::map<std::string, std::size_t> index_;
    std::shared_ptr<const Tokenizer> tokenizer_ = default_tokenizer();
};

enum class ToolName { search, open };

struct ToolCall {
    ToolName name = ToolName::search;
    std::string query;                // search
    std::string doc_id;               // open
    std::optional<int> chunk;         // open, defaults to 0

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

// {"name": "search", "args": {"query": ...}} or
// {"name": "open", "args": {"doc_id": ..., "chunk": n}}. A bare string is
// accepted as args for either tool.
std::optional<ToolCall> tool_call_from_json(const nlohmann::json& j);
nlohmann::json tool_call_to_json(const ToolCall& call);

struct ToolOutput {
    CursorId cursor_id = 0;
    std::string text;
    friend bool operator==(const ToolOutput&, const ToolOutput&) = default;
};

struct ToolConfig {
    std::size_t top_k = 5;
    std::size_t chunk_tokens = 2000;
    std::size_t snippet_tokens = 40;
};

struct SearchHit {
    std::size_t doc_index = 0;
    std::size_t score = 0;
};

std::vector<SearchHit> rank_documents(const Corpus& corpus, std::string_view query, std::size_t top_k);
std::size_t chunk_count(const Corpus& corpus, const Document& doc, std::size_t chunk_tokens);

// Pure renderers; the cursor header is the first line of every output.
std::string render_search(const Corpus& corpus, CursorId cursor, std::string_view query, const ToolConfig& cfg);
std::string render_open(const Corpus& corpus, CursorId cursor, const std::string& doc_id, int chunk,
                        const ToolConfig& cfg);

// Anything that can execute a tool call. The n-th executed call of a session
// receives cursor id n-1, whatever the tool.
class ToolBackend {
public:
    virtual ~ToolBackend() = default;
    virtual ToolOutput execute(const ToolCall& call) = 0;
    virtual void reset() = 0;
};

class CorpusTools final : public ToolBackend {
public:
    CorpusTools(std::shared_ptr<const Corpus> corpus, ToolConfig config = {});

    // Throwing entry points: EmptyCorpus, UnknownDocument, ChunkOutOfRange.
    ToolOutput search(std::string_view query);
    ToolOutput open(const std::string& doc_id, std::optional<int> chunk = std::nullopt);

    // Never throws for tool-level errors; they are rendered as the output
    // text and still consume a cursor id.
    ToolOutput execute(const ToolCall& call) override;
    void reset() override;

    const Corpus& corpus() const { return *corpus_; }
    const ToolConfig& config() const { return config_; }

private:
    CursorId take_cursor();

    std::shared_ptr<const Corpus> corpus_;
    ToolConfig config_;
    std::mutex mu_;
    CursorId next_cursor_ = 0;
};

// Local HTTP front-end for a ToolBackend:
//   POST /tools/call   {"name": ..., "args": ...} -> {"cursor_id": n, "text": ...}
//   POST /tools/reset  restarts cursor numbering
//   GET  /health
class ToolServer {
public:
    explicit ToolServer(ToolBackend& backend);
    ~ToolServer();
    ToolServer(const ToolServer&) = delete;
    ToolServer& operator=(const ToolServer&) = delete;

    // Binds and serves on a background thread; returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    // Serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace sidequest
