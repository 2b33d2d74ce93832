#pragma once

#include "sidequest/command.hpp"
#include "sidequest/policy.hpp"
#include "sidequest/trace.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sidequest {

// Where a cursor lives inside a trace.
struct TraceCursor {
    CursorId id = 0;
    int opened_turn = 0;
    std::size_t response_index = 0;
    std::optional<std::size_t> call_index;
    TokenSpan span;  // call + response
};

std::vector<TraceCursor> trace_cursors(const Trace& trace);

// Largest turn at which the cursor's "[Cursor i]" tag appears in an
// assistant, tool_call or final_answer message; the opening turn counts as
// a use. Throws std::out_of_range for an unknown cursor.
int last_use_index(const Trace& trace, CursorId cursor);
std::map<CursorId, int> last_use_indices(const Trace& trace);

// {c : last_use(c) < t}, ascending.
std::vector<CursorId> expired_at(const Trace& trace, int t);

struct CursorPartition {
    std::vector<CursorId> open;    // left for the annotated command to close
    std::vector<CursorId> closed;  // treated as already evicted
    friend bool operator==(const CursorPartition&, const CursorPartition&) = default;
};

// Each element goes to either side with probability 1/2, decided by a
// mt19937_64 seeded with `seed`, in ascending id order.
CursorPartition partition_expired(std::span<const CursorId> expired, std::uint64_t seed);

// Number of leading messages visible at the top of turn t: the initial user
// messages plus everything produced in turns < t.
std::size_t prefix_length(const Trace& trace, int t);

// Attention mask over the prefix: the spans listed in `masked` are hidden.
// An empty list is full attention.
struct MaskSpec {
    std::vector<TokenSpan> masked;
    bool full_attention() const { return masked.empty(); }
    friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

// Throws InvalidMaskTarget when a closed cursor was not opened before t.
MaskSpec build_mask(const Trace& trace, int t, std::span<const CursorId> closed);

// --- annotation ----------------------------------------------------------

// The annotation prompt with slots {formatted_conv}, {open_cursor_ids},
// {del_cursor_ids} and {cursors_final}.
const std::string& annotation_prompt_template();

struct AnnotationRequest {
    std::string trace_id;
    int turn = 0;
    std::string formatted_conv;
    std::vector<CursorId> open_cursor_ids;
    std::vector<CursorId> del_cursor_ids;
    std::vector<CursorId> cursors_final;
    std::string prompt;  // template with all slots filled
};

std::string format_conversation(const Trace& trace, std::size_t prefix_len, std::span<const CursorId> hidden);
std::string fill_annotation_prompt(const AnnotationRequest& request);
std::string format_id_list(std::span<const CursorId> ids);

class Annotator {
public:
    virtual ~Annotator() = default;
    // Raw model text; expected to contain the JSON answer object.
    virtual std::string annotate(const AnnotationRequest& request) = 0;
};

// Deterministic annotator that answers with the target solution and a short
// templated rationale.
class HindsightAnnotator final : public Annotator {
public:
    std::string annotate(const AnnotationRequest& request) override;
};

// Sends the filled prompt to an OpenAI-compatible endpoint.
class ChatAnnotator final : public Annotator {
public:
    explicit ChatAnnotator(ChatEndpointConfig config);
    std::string annotate(const AnnotationRequest& request) override;

private:
    ChatClient client_;
};

struct Annotation {
    std::string reasoning;
    std::vector<CursorId> useful_cursors;
    std::vector<CursorId> removable_cursors;
};

// Throws SampleRejected when no valid answer object is present.
Annotation parse_annotation(std::string_view raw);

// --- samples -------------------------------------------------------------

enum class SampleKind { main, aux };

struct Segment {
    std::string role;
    std::string text;
    std::size_t start = 0;
    std::size_t len = 0;
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct TrainingSample {
    SampleKind kind = SampleKind::main;
    std::vector<Segment> tokens;
    MaskSpec mask;
    std::optional<Logits> logits;  // main only; nullopt serializes as null
    double lambda_weight = 1.0;
    std::string source_trace_id;
    std::optional<int> turn;       // aux only
    EvictionCommand command;       // aux only: the CloseAction target
};

struct SynthesisConfig {
    std::string trigger = std::string(kDefaultTriggerPhrase);
    double aux_weight = 1.0;
};

// One auxiliary sample at turn t. Throws SampleRejected when the annotator
// output is invalid, disagrees with `open`, or removes a final citation.
TrainingSample synthesize_aux_trace(const Trace& trace, int t, const CursorPartition& partition,
                                    Annotator& annotator, const Tokenizer& tokenizer,
                                    const SynthesisConfig& config = {});

// Source of base-policy logits for a main trace.
class LogitsSource {
public:
    virtual ~LogitsSource() = default;
    virtual std::optional<Logits> logits_for(const Trace& trace) = 0;
};

class SyntheticLogitsSource final : public LogitsSource {
public:
    explicit SyntheticLogitsSource(std::size_t top_k = 20, std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer())
        : top_k_(top_k), tokenizer_(std::move(tokenizer)) {}
    std::optional<Logits> logits_for(const Trace& trace) override;

private:
    std::size_t top_k_;
    std::shared_ptr<const Tokenizer> tokenizer_;
};

struct DatasetConfig {
    int interval = 4;
    std::string trigger = std::string(kDefaultTriggerPhrase);
    std::uint64_t seed = 0;
    double lambda_weight = 500.0;
    double aux_weight = 1.0;
    int main_upsample = 3;
};

struct DatasetResult {
    std::vector<TrainingSample> samples;  // main samples appear once here
    std::size_t main_count = 0;
    std::size_t aux_count = 0;
    std::size_t rejected = 0;
    std::size_t skipped_incorrect = 0;
    std::vector<std::string> rejections;  // "trace_id@turn: reason"
};

// Seed used for the partition of `trace_id` at turn t.
std::uint64_t partition_seed(std::uint64_t seed, const std::string& trace_id, int t);

// Correct traces only: one main sample (full attention, logits if
// available) plus one aux sample for every t in [0, final_turn] with
// t mod interval == 0. A trace's `correct` flag is used unless `verdicts`
// names it.
DatasetResult build_dataset(const std::vector<Trace>& traces, const std::map<std::string, bool>& verdicts,
                            Annotator& annotator, LogitsSource* logits, const DatasetConfig& config,
                            const Tokenizer& tokenizer = *default_tokenizer());

std::string sample_to_json(const TrainingSample& sample);

// Main samples are written `main_upsample` times.
void write_dataset(std::ostream& out, const DatasetResult& result, int main_upsample);
std::string dataset_manifest(const DatasetResult& result, const DatasetConfig& config);

} // namespace sidequest
