#pragma once

#include "etp/corpus.hpp"
#include "etp/encoder.hpp"
#include "etp/nn.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace etp::model {

// Two-class task distribution; index order is (POSITIVE, NEGATIVE).
struct TaskDistribution {
    double p_positive = 0.5;
    double p_negative = 0.5;

    corpus::TaskLabel argmax() const {
        return p_positive >= p_negative ? corpus::TaskLabel::POSITIVE
                                        : corpus::TaskLabel::NEGATIVE;
    }
};

// What the predictor is conditioned on during training: the NLI pseudo-target
// mask (teacher forcing) or the explainer's current hard mask.
enum class MaskSource { PSEUDO_TARGET, EXPLAINER_HARD };

struct TrainConfig {
    double lambda_weight = 1.0;
    double learning_rate = 2e-5;
    int batch_size = 8;
    double adam_epsilon = 1e-8;
    double grad_clip_norm = 1.0;
    double dropout = 0.2;
    int max_epochs = 10;
    int early_stop_patience = 3;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 1;
    MaskSource mask_source = MaskSource::PSEUDO_TARGET;
    double weight_decay = 0.0;

    void validate() const;
};

// A full or masked input sequence: [CLS] query [SEP] sentences...
struct AssembledInput {
    std::vector<int> ids;
    std::vector<std::pair<int, int>> sentence_spans; // [start, end) per kept sentence
    bool empty_evidence = false;
};

AssembledInput assemble_full(const EncoderBackend& enc, const TokenizedPieces& pieces);

// Keeps only mask-selected sentences, in document order. An all-zero mask
// yields the query-only sequence with empty_evidence set.
AssembledInput assemble_masked(const EncoderBackend& enc, const TokenizedPieces& pieces,
                               const corpus::RationaleMask& mask);

struct ExplainOutput {
    std::vector<double> probs;
    corpus::RationaleMask mask; // probs > 0.5, strict
};

struct PredictOutput {
    TaskDistribution dist;
    bool empty_evidence = false;
};

struct LossBundle {
    nn::Var total;
    nn::Var pred;
    nn::Var expl;
    double total_value = 0.0;
    double pred_value = 0.0;
    double expl_value = 0.0;
};

// Supplies explainer training targets. In semi-supervised mode the provider
// is backed by the NLI predictor; gold annotations never pass through it.
class PseudoTargetProvider {
public:
    virtual ~PseudoTargetProvider() = default;
    virtual corpus::RationaleMask target_for(const corpus::Instance& instance) = 0;
    virtual std::string fingerprint() const = 0;
};

// Supervised baseline: targets are the instances' own gold rationales.
class GoldTargetProvider : public PseudoTargetProvider {
public:
    corpus::RationaleMask target_for(const corpus::Instance& instance) override;
    std::string fingerprint() const override { return "gold-targets:v1"; }
};

struct HeadConfig {
    int hidden_dim = 64;   // sentence-representation width d'
    std::uint64_t seed = 1;
};

// Shared-encoder Explain-Then-Predict model: sentence pooling + explainer
// head over the full input, task classifier over the masked input.
class EtpModel {
public:
    EtpModel(std::shared_ptr<EncoderBackend> encoder, HeadConfig cfg);

    // Sentence representations from start/end token hidden states
    // (end position inclusive): relu(concat(h_s, h_e) * W + b).
    nn::Var pool_sentences(const nn::Var& hidden,
                           const std::vector<std::pair<int, int>>& spans) const;

    // Per-sentence selection logits (N x 1).
    nn::Var explainer_logits(const nn::Var& sentence_reps, double dropout_rate,
                             std::mt19937_64& rng, bool train_mode) const;

    // Task logits (1 x 2) over the masked input's pooled representation.
    nn::Var task_logits(const nn::Var& masked_hidden) const;

    ExplainOutput explain(const corpus::Instance& instance) const;
    PredictOutput predict(const corpus::Instance& instance,
                          const corpus::RationaleMask& mask) const;

    LossBundle compute_losses(const corpus::Instance& instance,
                              const corpus::RationaleMask& pseudo_target,
                              double lambda_weight, MaskSource mask_source,
                              double dropout_rate, std::mt19937_64& rng,
                              bool train_mode) const;

    std::vector<nn::NodePtr> parameters() const;
    EncoderBackend& encoder() const { return *encoder_; }
    const HeadConfig& head_config() const { return cfg_; }
    std::string fingerprint() const;

private:
    std::shared_ptr<EncoderBackend> encoder_;
    HeadConfig cfg_;
    nn::NodePtr w_pool_, b_pool_;
    nn::NodePtr w_expl1_, b_expl1_, w_expl2_, b_expl2_;
    nn::NodePtr w_cls_, b_cls_;
};

struct EpochLog {
    int epoch = 0;
    double train_total = 0.0;
    double train_pred = 0.0;
    double train_expl = 0.0;
    double val_total = 0.0;
    double val_pred = 0.0;
    double val_expl = 0.0;
    double val_task_f1 = 0.0;
    double val_sentence_f1_vs_pseudo = 0.0;
};

struct TrainResult {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_total = 0.0;
    std::vector<EpochLog> log;
};

// Optimizes L_pred + lambda * L_expl with warm-up, gradient clipping and
// early stopping on validation loss; the model is left at the best-validation
// checkpoint. Explainer targets come exclusively from the provider.
TrainResult train(EtpModel& model, const corpus::DatasetSplit& train_split,
                  const corpus::DatasetSplit& val_split,
                  PseudoTargetProvider& targets, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints: weights blob + JSON manifest.
// ---------------------------------------------------------------------------

struct CheckpointManifest {
    std::string encoder_fingerprint;
    std::string targets_fingerprint;
    TinyEncoderConfig encoder_config;
    HeadConfig head_config;
    TrainConfig train_config;
    int epoch = 0;
    double val_total = 0.0;
    double val_task_f1 = 0.0;
    double val_sentence_f1 = 0.0;
};

void save_checkpoint(const EtpModel& model, const CheckpointManifest& manifest,
                     const std::filesystem::path& dir);

struct LoadedCheckpoint {
    std::shared_ptr<EtpModel> model;
    CheckpointManifest manifest;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

void save_weights(const std::vector<nn::NodePtr>& params, const std::filesystem::path& path);
void load_weights(const std::vector<nn::NodePtr>& params, const std::filesystem::path& path);

} // namespace etp::model
