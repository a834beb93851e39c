#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace etp::corpus {

enum class TaskKind { FEVER, BOOLQ, MULTIRC, SYNTHETIC };

std::string task_kind_name(TaskKind k);
TaskKind parse_task_kind(const std::string& name);

// Binary task label. Surface names are task-specific:
// FEVER SUPPORTS/REFUTES, BoolQ & MultiRC TRUE/FALSE.
enum class TaskLabel { POSITIVE, NEGATIVE };

std::string label_surface(TaskKind kind, TaskLabel label);
TaskLabel parse_label_surface(const std::string& surface);

struct Sentence {
    int index = 0;                     // 0-based position in document
    std::string text;
    std::pair<int, int> token_span{0, 0}; // [start, end) into the tokenized document

    bool operator==(const Sentence&) const = default;
};

struct Document {
    std::string doc_id;
    std::vector<Sentence> sentences;

    // Validates sentence ordering and span contiguity. Throws DataError.
    static Document make(std::string doc_id, std::vector<Sentence> sentences);
    // Builds sentences (with token spans) from raw per-sentence texts.
    static Document from_texts(std::string doc_id, const std::vector<std::string>& texts);

    int size() const { return static_cast<int>(sentences.size()); }
    bool operator==(const Document&) const = default;
};

struct Query {
    std::vector<std::string> parts;    // claim, or question+answer
    TaskKind task_kind = TaskKind::SYNTHETIC;

    static Query make(std::vector<std::string> parts, TaskKind kind);
    bool operator==(const Query&) const = default;
};

struct RationaleMask {
    std::vector<std::uint8_t> bits;

    static RationaleMask zeros(int n) { return RationaleMask{std::vector<std::uint8_t>(n, 0)}; }
    int size() const { return static_cast<int>(bits.size()); }
    int popcount() const;
    bool any() const { return popcount() > 0; }
    bool operator==(const RationaleMask&) const = default;
};

struct Instance {
    std::string instance_id;
    Document document;
    Query query;
    TaskLabel label = TaskLabel::POSITIVE;
    std::optional<RationaleMask> gold_rationale;
    std::vector<int> attack_positions;  // non-empty only for adversarial splits

    static Instance make(std::string id, Document doc, Query query, TaskLabel label,
                         std::optional<RationaleMask> gold);
    bool operator==(const Instance&) const = default;
};

enum class SplitName { TRAIN, VAL, TEST };

std::string split_name_str(SplitName s);

struct DatasetSplit {
    std::vector<Instance> instances;
    SplitName split_name = SplitName::TRAIN;

    // Throws DataError on duplicate instance_ids.
    void validate() const;
    bool operator==(const DatasetSplit&) const = default;
};

// ---------------------------------------------------------------------------
// Evidence spans <-> masks. Spans are (start_sentence, end_sentence) with the
// end exclusive, the ERASER convention.
// ---------------------------------------------------------------------------

struct EvidenceSpan {
    int start_sentence = 0;
    int end_sentence = 0;
    bool operator==(const EvidenceSpan&) const = default;
};

// Throws DataError when a span falls outside [0, n_sentences).
RationaleMask spans_to_mask(const std::vector<EvidenceSpan>& spans, int n_sentences);

// Returns maximal runs of set bits as sorted, merged spans.
std::vector<EvidenceSpan> mask_to_spans(const RationaleMask& mask);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

enum class SegmentMode { AUTO, LINE_PER_SENTENCE, HEURISTIC };

// Deterministic sentence segmentation. AUTO uses line-per-sentence when the
// text contains newlines, otherwise a terminal-punctuation heuristic.
// Throws DataError on empty input.
std::vector<Sentence> segment_sentences(const std::string& raw_text,
                                        SegmentMode mode = SegmentMode::AUTO);

struct LoadStats {
    int records = 0;
    int skipped_bad_span = 0;
};

// Loads ERASER-format data: {train,val,test}.jsonl plus docs/<doc_id> files
// (one sentence per line). Throws DataError when a referenced doc is missing.
// Records with out-of-range evidence spans are skipped and counted.
std::map<SplitName, DatasetSplit> load_eraser(const std::filesystem::path& data_dir,
                                              TaskKind task_kind,
                                              LoadStats* stats = nullptr);

struct TruncationResult {
    Document document;                // the selected contiguous window, reindexed from 0
    int window_start = 0;             // original index of the window's first sentence
    std::vector<int> kept_original_indices;

    // Projects a mask over the original document onto the window.
    // dropped_gold counts set bits that fell outside the window.
    RationaleMask project_mask(const RationaleMask& original, int* dropped_gold = nullptr) const;
};

// Picks the contiguous window of at most max_sentences sentences maximizing
// summed TF-IDF cosine similarity to the query; IDF is computed over the
// document's own sentences. Ties go to the earliest window.
TruncationResult tfidf_truncate(const Document& document, const Query& query, int max_sentences);

struct SubsetResult {
    DatasetSplit labeled;     // gold rationales retained
    DatasetSplit unlabeled;   // gold rationales cleared, task labels retained
};

// Samples ceil(fraction * |split|) instances without replacement, stratified
// by task label. Deterministic for a fixed seed.
// Throws UsageError when fraction is outside (0, 1].
SubsetResult sample_supervised_subset(const DatasetSplit& split, double fraction,
                                      std::uint64_t seed);

// Joins query parts with a single separator (default one space).
std::string build_query_text(const Query& query, const std::string& separator = " ");

// ---------------------------------------------------------------------------
// Canonical split files: one JSON record per instance. This is the format
// produced by `prepare` and consumed by every downstream command; adversarial
// splits add an attack_positions field.
// ---------------------------------------------------------------------------

void save_split_file(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_split_file(const std::filesystem::path& path, SplitName name);

} // namespace etp::corpus
