#include "etp/adversary.hpp"

#include "etp/errors.hpp"
#include "etp/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <random>

namespace etp::adversary {

using nlohmann::json;

void SubstitutionLexicon::add(const std::string& word, std::vector<std::string> substitutes) {
    std::string key = text::to_lower(text::trim(word));
    if (key.empty()) throw DataError("lexicon: empty head word");
    if (substitutes.empty()) {
        throw DataError("lexicon: no substitutes for '" + key + "'");
    }
    for (auto& s : substitutes) {
        s = text::to_lower(text::trim(s));
        if (s == key) throw DataError("lexicon: '" + key + "' maps to itself");
    }
    entries_[key] = std::move(substitutes);
}

bool SubstitutionLexicon::covers(const std::string& word) const {
    return entries_.count(text::to_lower(word)) > 0;
}

const std::vector<std::string>& SubstitutionLexicon::substitutes(const std::string& word) const {
    auto it = entries_.find(text::to_lower(word));
    if (it == entries_.end()) throw DataError("lexicon does not cover '" + word + "'");
    return it->second;
}

SubstitutionLexicon SubstitutionLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon: " + path.string());
    SubstitutionLexicon lex;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("malformed lexicon record at " + path.string() + ":" +
                            std::to_string(line_no));
        }
        lex.add(j.at("word").get<std::string>(),
                j.at("substitutes").get<std::vector<std::string>>());
    }
    return lex;
}

void SubstitutionLexicon::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write lexicon: " + path.string());
    for (const auto& [word, subs] : entries_) {
        json j;
        j["word"] = word;
        j["substitutes"] = subs;
        out << j.dump() << "\n";
    }
}

SubstitutionLexicon default_lexicon() {
    SubstitutionLexicon lex;
    // Names.
    lex.add("earl", {"manchester"});
    lex.add("scruggs", {"archer"});
    lex.add("john", {"harold", "victor"});
    lex.add("mary", {"greta", "irene"});
    lex.add("smith", {"tanner", "fletcher"});
    // Professions.
    lex.add("musician", {"songwriter"});
    lex.add("actor", {"plumber", "surveyor"});
    lex.add("writer", {"sculptor", "economist"});
    lex.add("teacher", {"engineer", "botanist"});
    lex.add("singer", {"drummer", "novelist"});
    // Instruments.
    lex.add("banjo", {"mandolin"});
    lex.add("guitar", {"trumpet", "cello"});
    lex.add("piano", {"violin", "flute"});
    lex.add("drums", {"harp", "organ"});
    // Common claim nouns.
    lex.add("film", {"statue", "bridge"});
    lex.add("album", {"mural", "pamphlet"});
    lex.add("movie", {"cathedral", "tunnel"});
    lex.add("song", {"painting", "sculpture"});
    lex.add("band", {"committee", "guild"});
    lex.add("city", {"archipelago", "plateau"});
    return lex;
}

std::string generate_attack(const corpus::Query& query, const SubstitutionLexicon& lexicon,
                            const AttackOptions& options) {
    if (query.parts.empty()) throw DataError("generate_attack: query has no parts");
    std::vector<std::string> tokens = text::tokenize_words(query.parts[0]);

    int covered = 0;
    for (const auto& tok : tokens) {
        if (!text::is_punct_token(tok) && lexicon.covers(tok)) ++covered;
    }
    if (covered == 0) {
        throw DataError("no lexicon-covered content word in query '" + query.parts[0] +
                        "'; extend the substitution lexicon");
    }

    std::mt19937_64 rng(options.seed);
    std::vector<std::string> out_tokens;
    out_tokens.reserve(tokens.size());
    for (const auto& tok : tokens) {
        std::string word = options.lowercase ? text::to_lower(tok) : tok;
        if (!text::is_punct_token(tok) && lexicon.covers(tok)) {
            const auto& subs = lexicon.substitutes(tok);
            std::uniform_int_distribution<std::size_t> pick(0, subs.size() - 1);
            word = subs[pick(rng)];
        }
        out_tokens.push_back(word);
    }
    return text::join(out_tokens, " ");
}

AdversarialInstance prefix_attack(const corpus::Instance& instance,
                                  const std::string& adversarial_sentence) {
    if (text::trim(adversarial_sentence).empty()) {
        throw DataError("prefix_attack: empty adversarial sentence");
    }
    std::vector<std::string> texts;
    texts.push_back(adversarial_sentence);
    for (const auto& s : instance.document.sentences) texts.push_back(s.text);

    AdversarialInstance out;
    out.original = instance;
    out.perturbed_document = corpus::Document::from_texts(instance.document.doc_id, texts);
    out.attack_positions = {0};
    out.adversarial_sentence = adversarial_sentence;
    return out;
}

corpus::Instance AdversarialInstance::as_instance() const {
    std::optional<corpus::RationaleMask> gold;
    if (original.gold_rationale) {
        corpus::RationaleMask shifted;
        shifted.bits.push_back(0);
        shifted.bits.insert(shifted.bits.end(), original.gold_rationale->bits.begin(),
                            original.gold_rationale->bits.end());
        gold = std::move(shifted);
    }
    corpus::Instance inst = corpus::Instance::make(original.instance_id, perturbed_document,
                                                   original.query, original.label,
                                                   std::move(gold));
    inst.attack_positions = attack_positions;
    return inst;
}

AttackSetResult build_attack_set(const corpus::DatasetSplit& split,
                                 const SubstitutionLexicon& lexicon,
                                 const AttackOptions& options) {
    AttackSetResult result;
    result.attacked.split_name = split.split_name;
    std::mt19937_64 seed_stream(options.seed);
    for (const auto& inst : split.instances) {
        AttackOptions per_instance = options;
        per_instance.seed = seed_stream(); // one seed per instance, in split order
        std::string sentence;
        try {
            sentence = generate_attack(inst.query, lexicon, per_instance);
        } catch (const DataError&) {
            ++result.skipped_uncovered;
            continue;
        }
        result.attacked.instances.push_back(prefix_attack(inst, sentence).as_instance());
    }
    return result;
}

} // namespace etp::adversary
