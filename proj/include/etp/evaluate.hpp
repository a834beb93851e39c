#pragma once

#include "etp/corpus.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace etp::evaluate {

// One scored instance: predictions plus whatever ground truth is available.
// This is the file-level contract between inference runs and evaluation.
struct PredictionRecord {
    std::string instance_id;
    corpus::TaskLabel predicted_label = corpus::TaskLabel::POSITIVE;
    corpus::RationaleMask predicted_mask;
    corpus::TaskLabel gold_label = corpus::TaskLabel::POSITIVE;
    std::optional<corpus::RationaleMask> gold_mask;
    std::vector<int> attack_positions;

    bool operator==(const PredictionRecord&) const = default;
};

struct RobustnessMetrics {
    std::optional<double> delta_task;   // empty when the original metric is 0
    std::optional<double> delta_plaus;
    double attack_rate = 0.0;
};

struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::optional<double> sentence_f1_macro;
    std::optional<double> sentence_f1_micro;
    std::optional<RobustnessMetrics> robustness;
    int instances = 0;
    int empty_masks = 0;
    int dropped_gold_sentences = 0;
    std::string config_fingerprint;
};

// F1 of the positive class with each sentence counted once. Conventions:
// both masks empty -> 1.0; exactly one empty -> 0.0.
// Throws DataError on length mismatch.
double sentence_f1(const corpus::RationaleMask& pred, const corpus::RationaleMask& gold);

struct CorpusSentenceF1 {
    double macro = 0.0; // mean of per-instance F1
    double micro = 0.0; // pooled TP/FP/FN
};

// Requires every record to carry a gold mask; errors list the offenders.
CorpusSentenceF1 corpus_sentence_f1(const std::vector<PredictionRecord>& records);

struct TaskMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

TaskMetrics task_metrics(const std::vector<PredictionRecord>& records);

// Unweighted mean of per-class F1 over the two classes; a class with an
// empty denominator contributes 0.
double binary_macro_f1(const std::vector<corpus::TaskLabel>& predicted,
                       const std::vector<corpus::TaskLabel>& gold);

// Normalized degradation between original and adversarial runs, paired by
// instance_id, plus the attack rate (fraction of adversarial masks selecting
// at least one attack position).
RobustnessMetrics robustness(const std::vector<PredictionRecord>& original,
                             const std::vector<PredictionRecord>& adversarial);

enum class ReportFormat { STRUCTURED, MARKDOWN };

void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path);

EvalReport parse_report(const std::filesystem::path& path);

// Prediction record files: one JSON record per line.
void save_prediction_records(const std::vector<PredictionRecord>& records,
                             const std::filesystem::path& path);
std::vector<PredictionRecord> load_prediction_records(const std::filesystem::path& path);

} // namespace etp::evaluate
