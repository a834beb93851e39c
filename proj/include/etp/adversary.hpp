#pragma once

#include "etp/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace etp::adversary {

// Maps content words to same-part-of-speech contrastive substitutes.
// No word maps to itself.
class SubstitutionLexicon {
public:
    SubstitutionLexicon() = default;

    // Throws DataError when a word lists itself as a substitute or has an
    // empty substitute list. Keys and substitutes are lowercased.
    void add(const std::string& word, std::vector<std::string> substitutes);

    bool covers(const std::string& word) const;
    const std::vector<std::string>& substitutes(const std::string& word) const;
    int size() const { return static_cast<int>(entries_.size()); }

    static SubstitutionLexicon load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::vector<std::string>> entries_;
};

// The shipped default: common names, professions and instruments in the
// style of fact-verification claims.
SubstitutionLexicon default_lexicon();

struct AdversarialInstance {
    corpus::Instance original;
    corpus::Document perturbed_document;
    std::vector<int> attack_positions; // prefix indices, always {0} here
    std::string adversarial_sentence;

    // The perturbed instance in corpus form (gold re-indexed, attack
    // positions recorded), ready for split-file emission.
    corpus::Instance as_instance() const;
};

struct AttackOptions {
    bool lowercase = true;
    std::uint64_t seed = 0;
};

// Replaces every lexicon-covered content word of the query's first part with
// a seeded-random substitute, joining all tokens (punctuation included) with
// single spaces. Throws DataError when no word is covered.
std::string generate_attack(const corpus::Query& query, const SubstitutionLexicon& lexicon,
                            const AttackOptions& options);

// Prepends the adversarial sentence at position 0; originals shift by one,
// the gold rationale (when present) shifts with them.
AdversarialInstance prefix_attack(const corpus::Instance& instance,
                                  const std::string& adversarial_sentence);

struct AttackSetResult {
    corpus::DatasetSplit attacked;
    int skipped_uncovered = 0; // instances whose query had no coverable word
};

// Applies generate_attack + prefix_attack across a split; uncoverable
// queries are excluded and counted.
AttackSetResult build_attack_set(const corpus::DatasetSplit& split,
                                 const SubstitutionLexicon& lexicon,
                                 const AttackOptions& options);

} // namespace etp::adversary
