#include "etp/corpus.hpp"

#include "etp/errors.hpp"
#include "etp/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace etp::corpus {

using nlohmann::json;

std::string task_kind_name(TaskKind k) {
    switch (k) {
    case TaskKind::FEVER: return "fever";
    case TaskKind::BOOLQ: return "boolq";
    case TaskKind::MULTIRC: return "multirc";
    case TaskKind::SYNTHETIC: return "synthetic";
    }
    throw DataError("unknown task kind");
}

TaskKind parse_task_kind(const std::string& name) {
    std::string n = text::to_lower(name);
    if (n == "fever") return TaskKind::FEVER;
    if (n == "boolq") return TaskKind::BOOLQ;
    if (n == "multirc") return TaskKind::MULTIRC;
    if (n == "synthetic") return TaskKind::SYNTHETIC;
    throw UsageError("unknown task kind: " + name);
}

std::string label_surface(TaskKind kind, TaskLabel label) {
    if (kind == TaskKind::FEVER) {
        return label == TaskLabel::POSITIVE ? "SUPPORTS" : "REFUTES";
    }
    return label == TaskLabel::POSITIVE ? "TRUE" : "FALSE";
}

TaskLabel parse_label_surface(const std::string& surface) {
    std::string s = text::to_lower(text::trim(surface));
    if (s == "supports" || s == "true" || s == "positive") return TaskLabel::POSITIVE;
    if (s == "refutes" || s == "false" || s == "negative") return TaskLabel::NEGATIVE;
    throw DataError("unrecognized classification label: " + surface);
}

int RationaleMask::popcount() const {
    int n = 0;
    for (auto b : bits) n += (b != 0) ? 1 : 0;
    return n;
}

Document Document::make(std::string doc_id, std::vector<Sentence> sentences) {
    if (sentences.empty()) throw DataError("document " + doc_id + " has no sentences");
    int expected_start = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const Sentence& s = sentences[i];
        if (s.index != static_cast<int>(i)) {
            throw DataError("document " + doc_id + ": sentence index " +
                            std::to_string(s.index) + " out of order");
        }
        if (s.token_span.first >= s.token_span.second) {
            throw DataError("document " + doc_id + ": empty token span at sentence " +
                            std::to_string(i));
        }
        if (s.token_span.first != expected_start) {
            throw DataError("document " + doc_id + ": non-contiguous token span at sentence " +
                            std::to_string(i));
        }
        expected_start = s.token_span.second;
    }
    Document d;
    d.doc_id = std::move(doc_id);
    d.sentences = std::move(sentences);
    return d;
}

Document Document::from_texts(std::string doc_id, const std::vector<std::string>& texts) {
    std::vector<Sentence> sentences;
    int tok_pos = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        int n_tok = static_cast<int>(text::tokenize_words(texts[i]).size());
        if (n_tok == 0) {
            throw DataError("document " + doc_id + ": sentence " + std::to_string(i) +
                            " has no tokens");
        }
        Sentence s;
        s.index = static_cast<int>(i);
        s.text = texts[i];
        s.token_span = {tok_pos, tok_pos + n_tok};
        tok_pos += n_tok;
        sentences.push_back(std::move(s));
    }
    return make(std::move(doc_id), std::move(sentences));
}

Query Query::make(std::vector<std::string> parts, TaskKind kind) {
    if (kind == TaskKind::MULTIRC) {
        if (parts.size() != 2) {
            throw DataError("MULTIRC query must have exactly 2 parts, got " +
                            std::to_string(parts.size()));
        }
    } else if (kind == TaskKind::FEVER || kind == TaskKind::BOOLQ) {
        if (parts.size() != 1) {
            throw DataError(task_kind_name(kind) + " query must have exactly 1 part, got " +
                            std::to_string(parts.size()));
        }
    } else if (parts.empty() || parts.size() > 2) {
        throw DataError("query must have 1 or 2 parts");
    }
    Query q;
    q.parts = std::move(parts);
    q.task_kind = kind;
    return q;
}

Instance Instance::make(std::string id, Document doc, Query query, TaskLabel label,
                        std::optional<RationaleMask> gold) {
    if (gold && gold->size() != doc.size()) {
        throw DataError("instance " + id + ": gold rationale length " +
                        std::to_string(gold->size()) + " != document length " +
                        std::to_string(doc.size()));
    }
    Instance inst;
    inst.instance_id = std::move(id);
    inst.document = std::move(doc);
    inst.query = std::move(query);
    inst.label = label;
    inst.gold_rationale = std::move(gold);
    return inst;
}

std::string split_name_str(SplitName s) {
    switch (s) {
    case SplitName::TRAIN: return "train";
    case SplitName::VAL: return "val";
    case SplitName::TEST: return "test";
    }
    throw DataError("unknown split name");
}

void DatasetSplit::validate() const {
    std::set<std::string> seen;
    for (const auto& inst : instances) {
        if (!seen.insert(inst.instance_id).second) {
            throw DataError("duplicate instance_id in split: " + inst.instance_id);
        }
    }
}

RationaleMask spans_to_mask(const std::vector<EvidenceSpan>& spans, int n_sentences) {
    RationaleMask mask = RationaleMask::zeros(n_sentences);
    for (const auto& sp : spans) {
        if (sp.start_sentence < 0 || sp.end_sentence > n_sentences ||
            sp.start_sentence >= sp.end_sentence) {
            throw DataError("evidence span [" + std::to_string(sp.start_sentence) + "," +
                            std::to_string(sp.end_sentence) + ") out of range for " +
                            std::to_string(n_sentences) + " sentences");
        }
        for (int i = sp.start_sentence; i < sp.end_sentence; ++i) mask.bits[i] = 1;
    }
    return mask;
}

std::vector<EvidenceSpan> mask_to_spans(const RationaleMask& mask) {
    std::vector<EvidenceSpan> spans;
    int n = mask.size();
    int i = 0;
    while (i < n) {
        if (mask.bits[i]) {
            int j = i;
            while (j < n && mask.bits[j]) ++j;
            spans.push_back({i, j});
            i = j;
        } else {
            ++i;
        }
    }
    return spans;
}

namespace {

bool is_sentence_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::vector<std::string> heuristic_split(const std::string& raw) {
    std::vector<std::string> out;
    std::size_t start = 0;
    std::size_t i = 0;
    const std::size_t n = raw.size();
    while (i < n) {
        if (is_sentence_terminal(raw[i])) {
            std::size_t j = i;
            while (j + 1 < n && (is_sentence_terminal(raw[j + 1]) || raw[j + 1] == '"' ||
                                 raw[j + 1] == '\'' || raw[j + 1] == ')')) {
                ++j;
            }
            // Boundary only when followed by whitespace and an
            // uppercase/digit sentence opener.
            std::size_t k = j + 1;
            while (k < n && std::isspace(static_cast<unsigned char>(raw[k]))) ++k;
            bool at_end = (k >= n);
            bool opener = !at_end && (std::isupper(static_cast<unsigned char>(raw[k])) ||
                                      std::isdigit(static_cast<unsigned char>(raw[k])) ||
                                      raw[k] == '"');
            if ((at_end || (k > j + 1 && opener))) {
                std::string sent = text::trim(raw.substr(start, j + 1 - start));
                if (!sent.empty()) out.push_back(sent);
                start = k;
                i = k;
                continue;
            }
            i = j + 1;
            continue;
        }
        ++i;
    }
    std::string tail = text::trim(raw.substr(start));
    if (!tail.empty()) out.push_back(tail);
    return out;
}

} // namespace

std::vector<Sentence> segment_sentences(const std::string& raw_text, SegmentMode mode) {
    if (text::trim(raw_text).empty()) throw DataError("cannot segment empty text");

    bool line_mode = (mode == SegmentMode::LINE_PER_SENTENCE) ||
                     (mode == SegmentMode::AUTO && raw_text.find('\n') != std::string::npos);

    std::vector<std::string> texts;
    if (line_mode) {
        std::istringstream in(raw_text);
        std::string line;
        while (std::getline(in, line)) {
            line = text::trim(line);
            if (!line.empty()) texts.push_back(line);
        }
    } else {
        texts = heuristic_split(raw_text);
    }
    if (texts.empty()) throw DataError("segmentation produced no sentences");

    std::vector<Sentence> sentences;
    int tok_pos = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        int n_tok = static_cast<int>(text::tokenize_words(texts[i]).size());
        Sentence s;
        s.index = static_cast<int>(i);
        s.text = texts[i];
        s.token_span = {tok_pos, tok_pos + std::max(1, n_tok)};
        tok_pos = s.token_span.second;
        sentences.push_back(std::move(s));
    }
    return sentences;
}

namespace {

json parse_json_line(const std::string& line, const std::string& context) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("malformed JSON record in " + context);
    return j;
}

std::vector<std::string> split_multirc_query(const std::string& q) {
    // MultiRC queries arrive as "question || answer".
    auto pos = q.find("||");
    if (pos == std::string::npos) {
        throw DataError("MultiRC query missing '||' delimiter: " + q);
    }
    return {text::trim(q.substr(0, pos)), text::trim(q.substr(pos + 2))};
}

DatasetSplit load_eraser_split(const std::filesystem::path& ann_path, SplitName name,
                               TaskKind task_kind,
                               const std::filesystem::path& docs_dir,
                               std::map<std::string, Document>& doc_cache,
                               LoadStats* stats) {
    std::ifstream in(ann_path);
    if (!in) throw DataError("cannot open annotation file: " + ann_path.string());

    DatasetSplit split;
    split.split_name = name;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json rec = parse_json_line(line, ann_path.string() + ":" + std::to_string(line_no));
        if (stats) stats->records++;

        std::string ann_id = rec.at("annotation_id").get<std::string>();
        std::string query_str = rec.at("query").get<std::string>();
        TaskLabel label = parse_label_surface(rec.at("classification").get<std::string>());

        // Evidence groups: list of lists of {docid, start_sentence, end_sentence}.
        std::vector<EvidenceSpan> spans;
        std::string doc_id;
        for (const auto& group : rec.at("evidences")) {
            for (const auto& ev : group) {
                std::string d = ev.at("docid").get<std::string>();
                if (doc_id.empty()) doc_id = d;
                if (d != doc_id) {
                    throw DataError("record " + ann_id + " references multiple documents");
                }
                spans.push_back({ev.at("start_sentence").get<int>(),
                                 ev.at("end_sentence").get<int>()});
            }
        }
        if (doc_id.empty()) {
            // No evidence group named a document; fall back to a docid field.
            if (rec.contains("docids") && rec["docids"].is_array() && !rec["docids"].empty()) {
                doc_id = rec["docids"][0].get<std::string>();
            } else {
                throw DataError("record " + ann_id + " has no document reference");
            }
        }

        auto it = doc_cache.find(doc_id);
        if (it == doc_cache.end()) {
            std::filesystem::path doc_path = docs_dir / doc_id;
            std::ifstream doc_in(doc_path);
            if (!doc_in) {
                throw DataError("missing document for doc_id '" + doc_id + "' (expected " +
                                doc_path.string() + ")");
            }
            std::stringstream buf;
            buf << doc_in.rdbuf();
            Document doc = Document::make(
                doc_id, segment_sentences(buf.str(), SegmentMode::LINE_PER_SENTENCE));
            it = doc_cache.emplace(doc_id, std::move(doc)).first;
        }
        const Document& doc = it->second;

        RationaleMask gold;
        try {
            gold = spans_to_mask(spans, doc.size());
        } catch (const DataError&) {
            if (stats) stats->skipped_bad_span++;
            continue; // skip record, keep loading
        }

        std::vector<std::string> parts;
        if (task_kind == TaskKind::MULTIRC) {
            parts = split_multirc_query(query_str);
        } else {
            parts = {text::trim(query_str)};
        }

        split.instances.push_back(Instance::make(ann_id, doc,
                                                 Query::make(parts, task_kind), label,
                                                 gold));
    }
    split.validate();
    return split;
}

} // namespace

std::map<SplitName, DatasetSplit> load_eraser(const std::filesystem::path& data_dir,
                                              TaskKind task_kind, LoadStats* stats) {
    std::filesystem::path docs_dir = data_dir / "docs";
    if (!std::filesystem::is_directory(docs_dir)) {
        throw DataError("documents store not found: " + docs_dir.string());
    }
    std::map<std::string, Document> doc_cache;
    std::map<SplitName, DatasetSplit> out;
    for (SplitName name : {SplitName::TRAIN, SplitName::VAL, SplitName::TEST}) {
        std::filesystem::path p = data_dir / (split_name_str(name) + ".jsonl");
        if (!std::filesystem::exists(p)) continue;
        out[name] = load_eraser_split(p, name, task_kind, docs_dir, doc_cache, stats);
    }
    if (out.empty()) {
        throw DataError("no {train,val,test}.jsonl annotation files under " +
                        data_dir.string());
    }
    return out;
}

// ---------------------------------------------------------------------------
// TF-IDF truncation
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> content_tokens(const std::string& s) {
    std::vector<std::string> toks;
    for (const auto& t : text::tokenize_words(text::to_lower(s))) {
        if (!text::is_punct_token(t)) toks.push_back(t);
    }
    return toks;
}

using TermVec = std::map<std::string, double>;

double cosine(const TermVec& a, const TermVec& b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (const auto& [t, w] : a) {
        na += w * w;
        auto it = b.find(t);
        if (it != b.end()) dot += w * it->second;
    }
    for (const auto& [t, w] : b) nb += w * w;
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

RationaleMask TruncationResult::project_mask(const RationaleMask& original,
                                             int* dropped_gold) const {
    RationaleMask out = RationaleMask::zeros(static_cast<int>(kept_original_indices.size()));
    int dropped = 0;
    std::set<int> kept(kept_original_indices.begin(), kept_original_indices.end());
    for (int i = 0; i < original.size(); ++i) {
        if (!original.bits[i]) continue;
        if (kept.count(i)) {
            int new_idx = i - window_start;
            out.bits[new_idx] = 1;
        } else {
            ++dropped;
        }
    }
    if (dropped_gold) *dropped_gold = dropped;
    return out;
}

TruncationResult tfidf_truncate(const Document& document, const Query& query,
                                int max_sentences) {
    if (max_sentences < 1) throw UsageError("max_sentences must be >= 1");

    const int n = document.size();
    TruncationResult res;
    if (n <= max_sentences) {
        res.document = document;
        res.window_start = 0;
        res.kept_original_indices.resize(n);
        std::iota(res.kept_original_indices.begin(), res.kept_original_indices.end(), 0);
        return res;
    }

    // Document frequencies over the document's own sentences.
    std::map<std::string, int> df;
    std::vector<std::vector<std::string>> sent_tokens(n);
    for (int i = 0; i < n; ++i) {
        sent_tokens[i] = content_tokens(document.sentences[i].text);
        std::set<std::string> uniq(sent_tokens[i].begin(), sent_tokens[i].end());
        for (const auto& t : uniq) df[t]++;
    }
    auto idf = [&](const std::string& t) {
        auto it = df.find(t);
        int d = (it == df.end()) ? 0 : it->second;
        return std::log((1.0 + n) / (1.0 + d)) + 1.0;
    };
    auto vectorize = [&](const std::vector<std::string>& toks) {
        TermVec v;
        for (const auto& t : toks) v[t] += 1.0;
        for (auto& [t, w] : v) w *= idf(t);
        return v;
    };

    TermVec qvec = vectorize(content_tokens(build_query_text(query)));
    std::vector<double> sent_score(n);
    for (int i = 0; i < n; ++i) sent_score[i] = cosine(vectorize(sent_tokens[i]), qvec);

    int best_start = 0;
    double best_score = -1.0;
    for (int start = 0; start + max_sentences <= n; ++start) {
        double s = 0.0;
        for (int i = start; i < start + max_sentences; ++i) s += sent_score[i];
        if (s > best_score + 1e-12) { // strict improvement; ties keep the earliest
            best_score = s;
            best_start = start;
        }
    }

    std::vector<std::string> texts;
    for (int i = best_start; i < best_start + max_sentences; ++i) {
        texts.push_back(document.sentences[i].text);
        res.kept_original_indices.push_back(i);
    }
    res.document = Document::from_texts(document.doc_id, texts);
    res.window_start = best_start;
    return res;
}

// ---------------------------------------------------------------------------
// Supervised-subset sampling
// ---------------------------------------------------------------------------

SubsetResult sample_supervised_subset(const DatasetSplit& split, double fraction,
                                      std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw UsageError("supervision fraction must lie in (0, 1]");
    }
    for (const auto& inst : split.instances) {
        if (!inst.gold_rationale) {
            throw DataError("instance " + inst.instance_id +
                            " lacks a gold rationale; cannot sample supervised subset");
        }
    }

    const int n = static_cast<int>(split.instances.size());
    const int k = static_cast<int>(std::ceil(fraction * n));

    // Per-class quotas by largest remainder, capped at class size.
    std::vector<int> pos_idx;
    std::vector<int> neg_idx;
    for (int i = 0; i < n; ++i) {
        (split.instances[i].label == TaskLabel::POSITIVE ? pos_idx : neg_idx).push_back(i);
    }
    double q_pos = pos_idx.empty() ? 0.0 : static_cast<double>(k) * pos_idx.size() / n;
    int take_pos = static_cast<int>(std::floor(q_pos));
    int take_neg = static_cast<int>(std::floor(static_cast<double>(k) * neg_idx.size() / n));
    int remainder = k - take_pos - take_neg;
    double frac_pos = q_pos - take_pos;
    double frac_neg = (static_cast<double>(k) * neg_idx.size() / n) - take_neg;
    while (remainder > 0) {
        if (frac_pos >= frac_neg && take_pos < static_cast<int>(pos_idx.size())) {
            ++take_pos;
            frac_pos = -1.0;
        } else {
            ++take_neg;
            frac_neg = -1.0;
        }
        --remainder;
    }
    take_pos = std::min<int>(take_pos, static_cast<int>(pos_idx.size()));
    take_neg = std::min<int>(take_neg, static_cast<int>(neg_idx.size()));
    // Spill over when one class is too small to meet its quota.
    int deficit = k - take_pos - take_neg;
    if (deficit > 0) {
        int spare_pos = static_cast<int>(pos_idx.size()) - take_pos;
        int add_pos = std::min(deficit, spare_pos);
        take_pos += add_pos;
        deficit -= add_pos;
        take_neg += std::min(deficit, static_cast<int>(neg_idx.size()) - take_neg);
    }

    std::mt19937_64 rng(seed);
    auto pick = [&rng](std::vector<int> idx, int take) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(take);
        return std::set<int>(idx.begin(), idx.end());
    };
    std::set<int> chosen = pick(pos_idx, take_pos);
    std::set<int> chosen_neg = pick(neg_idx, take_neg);
    chosen.insert(chosen_neg.begin(), chosen_neg.end());

    SubsetResult out;
    out.labeled.split_name = split.split_name;
    out.unlabeled.split_name = split.split_name;
    for (int i = 0; i < n; ++i) {
        if (chosen.count(i)) {
            out.labeled.instances.push_back(split.instances[i]);
        } else {
            Instance inst = split.instances[i];
            inst.gold_rationale.reset();
            out.unlabeled.instances.push_back(std::move(inst));
        }
    }
    return out;
}

std::string build_query_text(const Query& query, const std::string& separator) {
    return text::join(query.parts, separator);
}

// ---------------------------------------------------------------------------
// Canonical split files
// ---------------------------------------------------------------------------

void save_split_file(const DatasetSplit& split, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write split file: " + path.string());
    for (const auto& inst : split.instances) {
        json j;
        j["instance_id"] = inst.instance_id;
        j["doc_id"] = inst.document.doc_id;
        std::vector<std::string> texts;
        for (const auto& s : inst.document.sentences) texts.push_back(s.text);
        j["sentences"] = texts;
        j["query"] = inst.query.parts;
        j["task_kind"] = task_kind_name(inst.query.task_kind);
        j["label"] = label_surface(inst.query.task_kind, inst.label);
        if (inst.gold_rationale) {
            std::vector<int> bits(inst.gold_rationale->bits.begin(),
                                  inst.gold_rationale->bits.end());
            j["gold_rationale"] = bits;
        }
        if (!inst.attack_positions.empty()) j["attack_positions"] = inst.attack_positions;
        out << j.dump() << "\n";
    }
}

DatasetSplit load_split_file(const std::filesystem::path& path, SplitName name) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split file: " + path.string());
    DatasetSplit split;
    split.split_name = name;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j = parse_json_line(line, path.string() + ":" + std::to_string(line_no));
        TaskKind kind = parse_task_kind(j.at("task_kind").get<std::string>());
        Document doc = Document::from_texts(j.at("doc_id").get<std::string>(),
                                            j.at("sentences").get<std::vector<std::string>>());
        Query query = Query::make(j.at("query").get<std::vector<std::string>>(), kind);
        TaskLabel label = parse_label_surface(j.at("label").get<std::string>());
        std::optional<RationaleMask> gold;
        if (j.contains("gold_rationale")) {
            auto bits = j["gold_rationale"].get<std::vector<int>>();
            RationaleMask m;
            for (int b : bits) m.bits.push_back(b ? 1 : 0);
            gold = std::move(m);
        }
        Instance inst = Instance::make(j.at("instance_id").get<std::string>(), std::move(doc),
                                       std::move(query), label, std::move(gold));
        if (j.contains("attack_positions")) {
            inst.attack_positions = j["attack_positions"].get<std::vector<int>>();
        }
        split.instances.push_back(std::move(inst));
    }
    split.validate();
    return split;
}

} // namespace etp::corpus
