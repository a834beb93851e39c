#pragma once

#include "etp/corpus.hpp"
#include "etp/model.hpp"
#include "etp/nli.hpp"

#include <filesystem>
#include <vector>

namespace etp::crosscheck {

// NLI probabilities with the neutral class dropped and the remainder
// renormalized. Degenerate when entail+contra was numerically zero.
struct TwoClassNLI {
    double p_entail = 0.5;
    double p_contra = 0.5;
    bool degenerate = false;
};

struct CrossCheckedPrediction {
    model::TaskDistribution base_task_dist;
    TwoClassNLI nli_aggregate;
    model::TaskDistribution scaled_task_dist;
    model::TaskDistribution raw_product; // unnormalized Eq.-style product
    corpus::TaskLabel final_label = corpus::TaskLabel::POSITIVE;
    int n_selected = 0;
    bool fallback_used = false;
    std::vector<nli::NLIDistribution> selected_distributions;
    corpus::RationaleMask mask;
};

// Drops the neutral mass: (e, c) / (e + c). Returns (0.5, 0.5) flagged
// degenerate when e + c < 1e-9.
TwoClassNLI reweight(const nli::NLIDistribution& dist);

// Componentwise arithmetic mean over the selected sentences.
// Throws DataError on empty input (callers take the fallback path instead).
TwoClassNLI aggregate(const std::vector<TwoClassNLI>& reweighted);

struct ScaleResult {
    model::TaskDistribution raw_product;
    model::TaskDistribution renormalized;
    bool fallback_used = false; // both products were zero; base returned
};

// Elementwise product of the task distribution with the aggregated NLI
// probabilities (POSITIVE <-> entail, NEGATIVE <-> contra), renormalized.
ScaleResult scale(const model::TaskDistribution& task_dist, const TwoClassNLI& nli_agg);

// Pure composition over precomputed pieces: reweight each selected sentence's
// distribution, aggregate, scale. Empty selections skip scaling entirely.
CrossCheckedPrediction
cross_check_from(const model::TaskDistribution& base,
                 const std::vector<nli::NLIDistribution>& selected_distributions,
                 const corpus::RationaleMask& mask);

// Full inference path: explain -> predict -> classify selected sentences ->
// reweight -> aggregate -> scale.
CrossCheckedPrediction cross_checked_predict(const model::EtpModel& model,
                                             nli::NLIBackend& nli_backend,
                                             const corpus::Instance& instance);

// Per-instance trace records for debugging and evaluation (JSON lines).
void append_trace(const CrossCheckedPrediction& pred, const std::string& instance_id,
                  const std::filesystem::path& path);

} // namespace etp::crosscheck
