#pragma once

#include "etp/adversary.hpp"
#include "etp/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <map>

namespace etp::synthetic {

// Seeded generator of separable fact-verification style instances: each
// document plants exactly one decision sentence (approve/reject of the
// query's topic) among unrelated filler sentences. CPU-scale models can
// learn both the rationale and the task label from it.
struct SyntheticConfig {
    int n_instances = 200;
    int n_sentences = 6;
    double train_fraction = 0.7;
    double val_fraction = 0.15;
    std::uint64_t seed = 7;
};

std::map<corpus::SplitName, corpus::DatasetSplit> generate(const SyntheticConfig& config);

// Substitution lexicon covering the generator's topic nouns, for attack runs
// against synthetic data.
adversary::SubstitutionLexicon topic_lexicon();

// Writes the splits in ERASER format (annotation JSONL + docs/ store) so the
// regular ingestion path applies.
void write_eraser_format(const std::map<corpus::SplitName, corpus::DatasetSplit>& splits,
                         const std::filesystem::path& dir);

} // namespace etp::synthetic
