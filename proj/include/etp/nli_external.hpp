#pragma once

#include "etp/nli.hpp"

#include <memory>
#include <string>

namespace etp::nli {

// Adapter for an NLI model served over HTTP (e.g. the bundled Python server
// wrapping a pretrained transformer). Protocol, all JSON:
//   GET  /fingerprint        -> {"fingerprint": str}
//   GET  /capabilities       -> {"trainable": bool}
//   POST /predict            {"pairs": [[premise, hypothesis], ...]}
//                            -> {"distributions": [[e, c, n], ...]}
//   POST /train_epoch        {"pairs": [{...}], "config": {...}} -> {"loss": x}
//   POST /validation_loss    {"pairs": [{...}]} -> {"loss": x}
//   POST /save_state         -> {"state_id": str}
//   POST /restore_state      {"state_id": str} -> {}
// Distributions use the (entailment, contradiction, neutral) order.
class ExternalNLIBackend : public NLIBackend {
public:
    explicit ExternalNLIBackend(const std::string& base_url, int timeout_seconds = 300);
    ~ExternalNLIBackend() override;

    std::vector<NLIDistribution>
    predict_batch(std::span<const PremiseHypothesis> pairs) override;

    std::string fingerprint() const override { return fingerprint_; }

    bool trainable() const override { return trainable_; }
    double train_epoch(std::span<const NLIPair> pairs, const FineTuneConfig& cfg) override;
    double validation_loss(std::span<const NLIPair> pairs) override;
    std::string save_state() override;
    void restore_state(const std::string& state) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string fingerprint_;
    bool trainable_ = false;
};

} // namespace etp::nli
