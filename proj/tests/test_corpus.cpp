#include <doctest.h>

#include "etp/corpus.hpp"
#include "etp/errors.hpp"
#include "etp/text.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unistd.h>

using namespace etp;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("etp_test_" + tag + "_" +
                                                std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << content;
}

corpus::RationaleMask mask_of(std::initializer_list<int> bits) {
    corpus::RationaleMask m;
    for (int b : bits) m.bits.push_back(b ? 1 : 0);
    return m;
}

} // namespace

TEST_CASE("segment_sentences heuristic splits on terminal punctuation") {
    auto sents = corpus::segment_sentences("A b. C d.");
    REQUIRE(sents.size() == 2);
    CHECK(sents[0].text == "A b.");
    CHECK(sents[1].text == "C d.");
    CHECK(sents[0].index == 0);
    CHECK(sents[1].index == 1);
}

TEST_CASE("segment_sentences line-per-sentence mode") {
    auto sents = corpus::segment_sentences("one\ntwo");
    REQUIRE(sents.size() == 2);
    CHECK(sents[0].text == "one");
    CHECK(sents[1].text == "two");
}

TEST_CASE("segment_sentences rejects empty input") {
    CHECK_THROWS_AS(corpus::segment_sentences(""), DataError);
    CHECK_THROWS_AS(corpus::segment_sentences("   \n "), DataError);
}

TEST_CASE("segment_sentences does not split on interior abbreviations or lowercase") {
    auto sents = corpus::segment_sentences("The value was 3.5 and stable. It held.");
    REQUIRE(sents.size() == 2);
    CHECK(sents[0].text == "The value was 3.5 and stable.");
}

TEST_CASE("segmentation reconstructs the text modulo whitespace") {
    std::string raw = "First point. Second one here! Third?";
    auto sents = corpus::segment_sentences(raw);
    std::string joined;
    for (const auto& s : sents) {
        if (!joined.empty()) joined += " ";
        joined += s.text;
    }
    CHECK(joined == raw);
}

TEST_CASE("segmented sentences carry contiguous token spans") {
    auto sents = corpus::segment_sentences("A b. C d e.");
    CHECK(sents[0].token_span.first == 0);
    CHECK(sents[0].token_span.second == sents[1].token_span.first);
    CHECK(sents[1].token_span.second > sents[1].token_span.first);
}

TEST_CASE("spans_to_mask converts evidence covering sentences 2-3 of 5") {
    auto mask = corpus::spans_to_mask({{2, 4}}, 5);
    CHECK(mask == mask_of({0, 0, 1, 1, 0}));
}

TEST_CASE("spans_to_mask rejects out-of-range spans") {
    CHECK_THROWS_AS(corpus::spans_to_mask({{2, 9}}, 5), DataError);
    CHECK_THROWS_AS(corpus::spans_to_mask({{-1, 2}}, 5), DataError);
    CHECK_THROWS_AS(corpus::spans_to_mask({{3, 3}}, 5), DataError);
}

TEST_CASE("mask/span round trip is exact for all masks up to N=12") {
    for (int n = 1; n <= 12; ++n) {
        for (unsigned bits = 0; bits < (1u << n); ++bits) {
            corpus::RationaleMask mask;
            for (int i = 0; i < n; ++i) mask.bits.push_back((bits >> i) & 1u);
            auto spans = corpus::mask_to_spans(mask);
            CHECK(corpus::spans_to_mask(spans, n) == mask);
            // Spans are sorted, merged and non-adjacent.
            for (std::size_t k = 1; k < spans.size(); ++k) {
                CHECK(spans[k].start_sentence > spans[k - 1].end_sentence);
            }
        }
    }
}

TEST_CASE("build_query_text") {
    auto q1 = corpus::Query::make({"Kung Fu Panda made more than $1 million on opening day."},
                                  corpus::TaskKind::FEVER);
    CHECK(corpus::build_query_text(q1) ==
          "Kung Fu Panda made more than $1 million on opening day.");

    auto q2 = corpus::Query::make({"Is X true?", "yes"}, corpus::TaskKind::MULTIRC);
    CHECK(corpus::build_query_text(q2) == "Is X true? yes");
    CHECK(corpus::build_query_text(q2, "|") == "Is X true?|yes");
}

TEST_CASE("query part-count invariants") {
    CHECK_THROWS_AS(corpus::Query::make({"a", "b"}, corpus::TaskKind::FEVER), DataError);
    CHECK_THROWS_AS(corpus::Query::make({"only one"}, corpus::TaskKind::MULTIRC), DataError);
}

// ---------------------------------------------------------------------------
// TF-IDF truncation
// ---------------------------------------------------------------------------

namespace {

// Independent dense reference: same formula, separate code path.
double reference_window_score(const std::vector<std::string>& sentences,
                              const std::string& query_text, int start, int len) {
    int n = static_cast<int>(sentences.size());
    auto content = [](const std::string& s) {
        std::vector<std::string> out;
        for (const auto& t : text::tokenize_words(text::to_lower(s))) {
            if (!text::is_punct_token(t)) out.push_back(t);
        }
        return out;
    };
    std::set<std::string> vocab;
    std::vector<std::vector<std::string>> sent_toks;
    for (const auto& s : sentences) {
        sent_toks.push_back(content(s));
        for (const auto& t : sent_toks.back()) vocab.insert(t);
    }
    auto q_toks = content(query_text);
    for (const auto& t : q_toks) vocab.insert(t);

    std::map<std::string, double> idf;
    for (const auto& t : vocab) {
        int df = 0;
        for (const auto& toks : sent_toks) {
            if (std::find(toks.begin(), toks.end(), t) != toks.end()) ++df;
        }
        idf[t] = std::log((1.0 + n) / (1.0 + df)) + 1.0;
    }
    auto vec = [&](const std::vector<std::string>& toks) {
        std::map<std::string, double> v;
        for (const auto& t : toks) v[t] += 1.0;
        for (auto& [t, w] : v) w *= idf[t];
        return v;
    };
    auto cos = [](const std::map<std::string, double>& a,
                  const std::map<std::string, double>& b) {
        double dot = 0;
        double na = 0;
        double nb = 0;
        for (const auto& [t, w] : a) {
            na += w * w;
            auto it = b.find(t);
            if (it != b.end()) dot += w * it->second;
        }
        for (const auto& [t, w] : b) nb += w * w;
        return (na > 0 && nb > 0) ? dot / (std::sqrt(na) * std::sqrt(nb)) : 0.0;
    };
    auto qv = vec(q_toks);
    double score = 0.0;
    for (int i = start; i < start + len; ++i) score += cos(vec(sent_toks[i]), qv);
    return score;
}

} // namespace

TEST_CASE("tfidf_truncate returns short documents unchanged") {
    auto doc = corpus::Document::from_texts("d", {"a one .", "b two .", "c three ."});
    auto q = corpus::Query::make({"anything"}, corpus::TaskKind::BOOLQ);
    auto res = corpus::tfidf_truncate(doc, q, 5);
    CHECK(res.document == doc);
    CHECK(res.window_start == 0);
    CHECK(res.kept_original_indices == std::vector<int>{0, 1, 2});
}

TEST_CASE("tfidf_truncate picks the window matching the query (brute-force oracle)") {
    std::vector<std::string> sentences = {
        "grain stores rose sharply this season .",
        "the workers painted the fence white .",
        "a cat slept near the mill door .",
        "rivers flooded the lower meadow twice .",
        "the telescope observed the comet nightly .",
        "astronomers logged the comet position calmly .",
    };
    std::string query_text = "did the telescope observe the comet ?";
    auto doc = corpus::Document::from_texts("d", sentences);
    auto q = corpus::Query::make({query_text}, corpus::TaskKind::BOOLQ);

    auto res = corpus::tfidf_truncate(doc, q, 2);
    CHECK(res.window_start == 4);
    CHECK(res.kept_original_indices == std::vector<int>{4, 5});

    // Oracle: evaluate every contiguous window independently.
    int best = -1;
    double best_score = -1.0;
    for (int s = 0; s + 2 <= 6; ++s) {
        double sc = reference_window_score(sentences, query_text, s, 2);
        if (sc > best_score + 1e-12) {
            best_score = sc;
            best = s;
        }
    }
    CHECK(best == res.window_start);
}

TEST_CASE("tfidf_truncate output is a contiguous sub-window of bounded length") {
    std::vector<std::string> sentences;
    for (int i = 0; i < 9; ++i) {
        sentences.push_back("filler sentence number " + std::to_string(i) + " .");
    }
    sentences[3] = "the comet appeared over the bay .";
    auto doc = corpus::Document::from_texts("d", sentences);
    auto q = corpus::Query::make({"comet over the bay"}, corpus::TaskKind::BOOLQ);
    for (int k = 1; k <= 9; ++k) {
        auto res = corpus::tfidf_truncate(doc, q, k);
        CHECK(res.document.size() <= k);
        for (std::size_t i = 0; i < res.kept_original_indices.size(); ++i) {
            CHECK(res.kept_original_indices[i] ==
                  res.window_start + static_cast<int>(i));
            CHECK(res.document.sentences[i].text ==
                  doc.sentences[res.kept_original_indices[i]].text);
        }
    }
}

TEST_CASE("tfidf_truncate breaks ties toward the earliest window") {
    // No sentence shares a word with the query: every window scores 0.
    auto doc = corpus::Document::from_texts(
        "d", {"alpha beta .", "gamma delta .", "epsilon zeta .", "eta theta ."});
    auto q = corpus::Query::make({"unrelated words entirely"}, corpus::TaskKind::BOOLQ);
    auto res = corpus::tfidf_truncate(doc, q, 2);
    CHECK(res.window_start == 0);
}

TEST_CASE("tfidf_truncate projects gold masks and counts dropped sentences") {
    std::vector<std::string> sentences = {
        "one about nothing .", "two about nothing .", "the comet was seen here .",
        "four about nothing .", "five about nothing .",
    };
    auto doc = corpus::Document::from_texts("d", sentences);
    auto q = corpus::Query::make({"where was the comet seen ?"}, corpus::TaskKind::BOOLQ);
    auto res = corpus::tfidf_truncate(doc, q, 2);
    REQUIRE(res.document.size() == 2);

    corpus::RationaleMask gold = mask_of({1, 0, 1, 0, 0});
    int dropped = 0;
    auto projected = res.project_mask(gold, &dropped);
    CHECK(projected.size() == 2);
    CHECK(projected.popcount() + dropped == gold.popcount());
    CHECK(dropped >= 1); // sentence 0 is outside any comet-matching window
}

TEST_CASE("tfidf_truncate validates max_sentences") {
    auto doc = corpus::Document::from_texts("d", {"a ."});
    auto q = corpus::Query::make({"a"}, corpus::TaskKind::BOOLQ);
    CHECK_THROWS_AS(corpus::tfidf_truncate(doc, q, 0), UsageError);
}

// ---------------------------------------------------------------------------
// Supervised subset sampling
// ---------------------------------------------------------------------------

namespace {

corpus::DatasetSplit balanced_split(int n) {
    corpus::DatasetSplit split;
    split.split_name = corpus::SplitName::TRAIN;
    for (int i = 0; i < n; ++i) {
        auto doc = corpus::Document::from_texts("d" + std::to_string(i),
                                                {"first sentence .", "second sentence ."});
        auto q = corpus::Query::make({"query " + std::to_string(i)},
                                     corpus::TaskKind::SYNTHETIC);
        auto label = (i % 2 == 0) ? corpus::TaskLabel::POSITIVE : corpus::TaskLabel::NEGATIVE;
        split.instances.push_back(corpus::Instance::make(
            "i" + std::to_string(i), std::move(doc), std::move(q), label,
            mask_of({1, 0})));
    }
    return split;
}

} // namespace

TEST_CASE("sampling is stratified: 100 balanced instances at 0.1 give 5 per class") {
    auto split = balanced_split(100);
    auto res = corpus::sample_supervised_subset(split, 0.1, 7);
    CHECK(res.labeled.instances.size() == 10);
    int pos = 0;
    for (const auto& inst : res.labeled.instances) {
        if (inst.label == corpus::TaskLabel::POSITIVE) ++pos;
    }
    CHECK(pos == 5);
    CHECK(res.unlabeled.instances.size() == 90);
}

TEST_CASE("fraction 1.0 labels the whole split") {
    auto split = balanced_split(10);
    auto res = corpus::sample_supervised_subset(split, 1.0, 3);
    CHECK(res.labeled.instances.size() == 10);
    CHECK(res.unlabeled.instances.empty());
}

TEST_CASE("sampling is deterministic per seed") {
    auto split = balanced_split(40);
    auto a = corpus::sample_supervised_subset(split, 0.25, 11);
    auto b = corpus::sample_supervised_subset(split, 0.25, 11);
    CHECK(a.labeled == b.labeled);
    CHECK(a.unlabeled == b.unlabeled);
    auto c = corpus::sample_supervised_subset(split, 0.25, 12);
    CHECK(a.labeled.instances != c.labeled.instances);
}

TEST_CASE("sampling rejects fractions outside (0,1]") {
    auto split = balanced_split(4);
    CHECK_THROWS_AS(corpus::sample_supervised_subset(split, 0.0, 1), UsageError);
    CHECK_THROWS_AS(corpus::sample_supervised_subset(split, 1.5, 1), UsageError);
    CHECK_THROWS_AS(corpus::sample_supervised_subset(split, -0.1, 1), UsageError);
}

TEST_CASE("labeled and unlabeled partition the split; unlabeled keep task labels") {
    auto split = balanced_split(31); // odd size, unbalanced quotas
    auto res = corpus::sample_supervised_subset(split, 0.3, 5);
    CHECK(res.labeled.instances.size() ==
          static_cast<std::size_t>(std::ceil(0.3 * 31)));

    std::set<std::string> ids;
    for (const auto& inst : res.labeled.instances) {
        CHECK(inst.gold_rationale.has_value());
        ids.insert(inst.instance_id);
    }
    for (const auto& inst : res.unlabeled.instances) {
        CHECK_FALSE(inst.gold_rationale.has_value());
        CHECK(ids.insert(inst.instance_id).second); // disjoint
    }
    CHECK(ids.size() == split.instances.size());

    // Per-class counts within 1 of exact stratification.
    int pos = 0;
    for (const auto& inst : res.labeled.instances) {
        if (inst.label == corpus::TaskLabel::POSITIVE) ++pos;
    }
    double k = std::ceil(0.3 * 31);
    double exact_pos = k * 16.0 / 31.0;
    CHECK(std::abs(pos - exact_pos) <= 1.0);
}

// ---------------------------------------------------------------------------
// ERASER ingestion
// ---------------------------------------------------------------------------

namespace {

fs::path write_eraser_fixture(const std::string& tag) {
    fs::path dir = make_temp_dir(tag);
    write_file(dir / "docs" / "doc1",
               "Zero filler line here .\nOne more filler .\nThe claim is backed here .\n"
               "And also here .\nLast line filler .\n");
    write_file(dir / "docs" / "doc2", "Only line of doc two .\n");
    std::string train =
        R"({"annotation_id":"r1","query":"some claim","classification":"SUPPORTS","evidences":[[{"docid":"doc1","start_sentence":2,"end_sentence":4}]]})"
        "\n"
        R"({"annotation_id":"r2","query":"other claim","classification":"REFUTES","evidences":[[{"docid":"doc2","start_sentence":0,"end_sentence":1}]]})"
        "\n";
    write_file(dir / "train.jsonl", train);
    return dir;
}

} // namespace

TEST_CASE("load_eraser converts records, labels and evidence spans") {
    auto dir = write_eraser_fixture("load");
    corpus::LoadStats stats;
    auto splits = corpus::load_eraser(dir, corpus::TaskKind::FEVER, &stats);
    REQUIRE(splits.count(corpus::SplitName::TRAIN) == 1);
    const auto& train = splits[corpus::SplitName::TRAIN];
    REQUIRE(train.instances.size() == 2);
    CHECK(stats.records == 2);
    CHECK(stats.skipped_bad_span == 0);

    const auto& r1 = train.instances[0];
    CHECK(r1.instance_id == "r1");
    CHECK(r1.label == corpus::TaskLabel::POSITIVE); // SUPPORTS
    CHECK(r1.document.size() == 5);
    CHECK(*r1.gold_rationale == mask_of({0, 0, 1, 1, 0}));

    const auto& r2 = train.instances[1];
    CHECK(r2.label == corpus::TaskLabel::NEGATIVE); // REFUTES
    CHECK(*r2.gold_rationale == mask_of({1}));
    fs::remove_all(dir);
}

TEST_CASE("load_eraser names the missing doc_id") {
    auto dir = make_temp_dir("missingdoc");
    write_file(dir / "docs" / "present", "a line .\n");
    write_file(dir / "train.jsonl",
               R"({"annotation_id":"r1","query":"q","classification":"SUPPORTS","evidences":[[{"docid":"x99","start_sentence":0,"end_sentence":1}]]})"
               "\n");
    try {
        corpus::load_eraser(dir, corpus::TaskKind::FEVER, nullptr);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("x99") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("load_eraser skips records with out-of-range spans and counts them") {
    auto dir = make_temp_dir("badspan");
    write_file(dir / "docs" / "doc1", "one .\ntwo .\n");
    write_file(dir / "train.jsonl",
               R"({"annotation_id":"ok","query":"q","classification":"SUPPORTS","evidences":[[{"docid":"doc1","start_sentence":0,"end_sentence":1}]]})"
               "\n"
               R"({"annotation_id":"bad","query":"q","classification":"SUPPORTS","evidences":[[{"docid":"doc1","start_sentence":1,"end_sentence":7}]]})"
               "\n");
    corpus::LoadStats stats;
    auto splits = corpus::load_eraser(dir, corpus::TaskKind::FEVER, &stats);
    CHECK(splits[corpus::SplitName::TRAIN].instances.size() == 1);
    CHECK(stats.skipped_bad_span == 1);
    fs::remove_all(dir);
}

TEST_CASE("load_eraser splits MultiRC queries on the delimiter") {
    auto dir = make_temp_dir("multirc");
    write_file(dir / "docs" / "doc1", "one .\ntwo .\n");
    write_file(dir / "val.jsonl",
               R"({"annotation_id":"m1","query":"What is X? || the right answer","classification":"True","evidences":[[{"docid":"doc1","start_sentence":0,"end_sentence":1}]]})"
               "\n");
    auto splits = corpus::load_eraser(dir, corpus::TaskKind::MULTIRC, nullptr);
    const auto& inst = splits[corpus::SplitName::VAL].instances[0];
    REQUIRE(inst.query.parts.size() == 2);
    CHECK(inst.query.parts[0] == "What is X?");
    CHECK(inst.query.parts[1] == "the right answer");
    CHECK(inst.label == corpus::TaskLabel::POSITIVE);
    fs::remove_all(dir);
}

TEST_CASE("ingestion is idempotent") {
    auto dir = write_eraser_fixture("idempotent");
    auto a = corpus::load_eraser(dir, corpus::TaskKind::FEVER, nullptr);
    auto b = corpus::load_eraser(dir, corpus::TaskKind::FEVER, nullptr);
    CHECK(a == b);
    fs::remove_all(dir);
}

TEST_CASE("canonical split files round-trip") {
    auto dir = make_temp_dir("splitfile");
    auto split = balanced_split(7);
    split.instances[2].attack_positions = {0};
    corpus::save_split_file(split, dir / "train.jsonl");
    auto loaded = corpus::load_split_file(dir / "train.jsonl", corpus::SplitName::TRAIN);
    CHECK(loaded == split);

    // Byte-identical on re-save.
    corpus::save_split_file(loaded, dir / "again.jsonl");
    std::ifstream f1(dir / "train.jsonl");
    std::ifstream f2(dir / "again.jsonl");
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    fs::remove_all(dir);
}

TEST_CASE("document invariants are enforced") {
    CHECK_THROWS_AS(corpus::Document::from_texts("d", {}), DataError);
    corpus::Sentence bad;
    bad.index = 1; // out of order
    bad.text = "x";
    bad.token_span = {0, 1};
    CHECK_THROWS_AS(corpus::Document::make("d", {bad}), DataError);
}

TEST_CASE("instance gold mask must match document length") {
    auto doc = corpus::Document::from_texts("d", {"a .", "b ."});
    auto q = corpus::Query::make({"q"}, corpus::TaskKind::SYNTHETIC);
    CHECK_THROWS_AS(corpus::Instance::make("i", doc, q, corpus::TaskLabel::POSITIVE,
                                           mask_of({1})),
                    DataError);
}

TEST_CASE("duplicate instance ids are rejected") {
    auto split = balanced_split(2);
    split.instances[1].instance_id = split.instances[0].instance_id;
    CHECK_THROWS_AS(split.validate(), DataError);
}
