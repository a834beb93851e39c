#pragma once

#include "etp/corpus.hpp"
#include "etp/labelxform.hpp"
#include "etp/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace etp::nli {

// Probability triple over (entailment, contradiction, neutral). Every backend
// must map its native label order into this convention at the adapter
// boundary.
struct NLIDistribution {
    double p_entail = 0.0;
    double p_contra = 0.0;
    double p_neutral = 1.0;

    // Throws BackendError when any component leaves [0,1] or the sum strays
    // from 1 by more than 1e-6.
    void validate() const;

    static NLIDistribution one_hot(labelxform::NLILabel label);

    // Argmax with the fixed tie-break order ENTAILMENT > CONTRADICTION > NEUTRAL.
    labelxform::NLILabel argmax() const;
};

struct NLIPair {
    std::string premise_query;
    std::string hypothesis_sentence;
    labelxform::NLILabel target = labelxform::NLILabel::NEUTRAL;
    std::string source_instance_id;
    int sentence_index = 0;
};

struct FineTuneConfig {
    double learning_rate = 2e-5;
    int batch_size = 8;
    int max_epochs = 10;
    int early_stop_patience = 3;
    std::uint64_t seed = 1;
    // Optional class rebalancing: keep this fraction of NEUTRAL pairs when
    // building the fine-tuning set (1.0 keeps the natural distribution).
    double neutral_keep_fraction = 1.0;

    void validate() const;
};

using PremiseHypothesis = std::pair<std::string, std::string>;

// Pluggable NLI predictor. Inference must be deterministic for fixed weights;
// training-capable backends additionally implement the epoch-level hooks used
// by finetune_nli.
class NLIBackend {
public:
    virtual ~NLIBackend() = default;

    virtual std::vector<NLIDistribution>
    predict_batch(std::span<const PremiseHypothesis> pairs) = 0;

    virtual std::string fingerprint() const = 0;

    virtual bool trainable() const { return false; }
    // One optimization pass over the pairs; returns the mean training loss.
    virtual double train_epoch(std::span<const NLIPair> pairs, const FineTuneConfig& cfg);
    virtual double validation_loss(std::span<const NLIPair> pairs);
    // Opaque state snapshots used for best-checkpoint selection.
    virtual std::string save_state();
    virtual void restore_state(const std::string& state);
};

// Test double: replays one-hot distributions derived from gold rationales by
// the forward label transformation, optionally corrupted by a seeded noise
// rate (each sentence's label is resampled uniformly with probability rho).
// Unknown (query, sentence) pairs come back as one-hot NEUTRAL.
class MockOracleBackend : public NLIBackend {
public:
    MockOracleBackend(const std::vector<corpus::DatasetSplit>& splits, double noise_rho,
                      std::uint64_t seed);

    std::vector<NLIDistribution>
    predict_batch(std::span<const PremiseHypothesis> pairs) override;

    std::string fingerprint() const override;

    int known_pairs() const { return static_cast<int>(table_.size()); }

private:
    std::map<std::string, labelxform::NLILabel> table_;
    double noise_rho_;
    std::uint64_t seed_;
    std::uint64_t content_hash_ = 0;
};

// One pair per (instance, sentence), ordered by instance_id then sentence
// index; targets from the forward transformation of the gold rationale.
// Throws DataError when an instance lacks a gold rationale.
std::vector<NLIPair> build_finetune_pairs(const corpus::DatasetSplit& labeled);

// Applies neutral downsampling on top of build_finetune_pairs (seeded).
std::vector<NLIPair> build_finetune_pairs(const corpus::DatasetSplit& labeled,
                                          double neutral_keep_fraction,
                                          std::uint64_t seed);

struct FineTuneResult {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<double> val_losses;
};

// Owns the 90/10 train/val split of pairs, the epoch loop and best-checkpoint
// selection; per-epoch optimization is delegated to the backend. The backend
// is left restored to its best-validation state.
// Throws CapabilityError for non-trainable backends.
FineTuneResult finetune_nli(NLIBackend& backend, std::span<const NLIPair> pairs,
                            const FineTuneConfig& config);

// One distribution per sentence, in order, batched through predict_batch.
std::vector<NLIDistribution> classify_sentences(NLIBackend& backend,
                                                const corpus::Query& query,
                                                const corpus::Document& document);

// Argmax each per-sentence distribution to a hard NLI label, then apply the
// reverse transformation with the instance's task label. Gold rationales are
// never consulted.
corpus::RationaleMask pseudo_annotate(NLIBackend& backend, const corpus::Instance& instance);

// ---------------------------------------------------------------------------
// Pseudo-annotation cache: one JSON record per (backend fingerprint,
// instance). Concurrent readers are safe; writes are single-threaded appends.
// ---------------------------------------------------------------------------

struct CacheRecord {
    std::string instance_id;
    std::string backend_fingerprint;
    std::vector<NLIDistribution> distributions;
    corpus::RationaleMask mask;
};

class PseudoAnnotationCache {
public:
    explicit PseudoAnnotationCache(std::filesystem::path path);

    std::optional<CacheRecord> lookup(const std::string& backend_fingerprint,
                                      const std::string& instance_id) const;
    void put(const CacheRecord& record);

    int size() const { return static_cast<int>(records_.size()); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::map<std::pair<std::string, std::string>, CacheRecord> records_;
};

// Pseudo-target provider backed by an NLI backend with optional disk cache.
class NliPseudoProvider : public model::PseudoTargetProvider {
public:
    NliPseudoProvider(std::shared_ptr<NLIBackend> backend,
                      std::shared_ptr<PseudoAnnotationCache> cache = nullptr);

    corpus::RationaleMask target_for(const corpus::Instance& instance) override;
    std::string fingerprint() const override;

private:
    std::shared_ptr<NLIBackend> backend_;
    std::shared_ptr<PseudoAnnotationCache> cache_;
};

} // namespace etp::nli
