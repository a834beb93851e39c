#include "etp/crosscheck.hpp"

#include "etp/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace etp::crosscheck {

using nlohmann::json;

TwoClassNLI reweight(const nli::NLIDistribution& dist) {
    dist.validate();
    double mass = dist.p_entail + dist.p_contra;
    if (mass < 1e-9) {
        return TwoClassNLI{0.5, 0.5, true};
    }
    return TwoClassNLI{dist.p_entail / mass, dist.p_contra / mass, false};
}

TwoClassNLI aggregate(const std::vector<TwoClassNLI>& reweighted) {
    if (reweighted.empty()) {
        throw DataError("aggregate: no selected sentences; caller must take the fallback");
    }
    double e = 0.0;
    double c = 0.0;
    for (const auto& r : reweighted) {
        e += r.p_entail;
        c += r.p_contra;
    }
    double n = static_cast<double>(reweighted.size());
    return TwoClassNLI{e / n, c / n, false};
}

ScaleResult scale(const model::TaskDistribution& task_dist, const TwoClassNLI& nli_agg) {
    ScaleResult out;
    out.raw_product.p_positive = task_dist.p_positive * nli_agg.p_entail;
    out.raw_product.p_negative = task_dist.p_negative * nli_agg.p_contra;
    double mass = out.raw_product.p_positive + out.raw_product.p_negative;
    if (mass <= 0.0) {
        out.renormalized = task_dist;
        out.fallback_used = true;
        return out;
    }
    out.renormalized.p_positive = out.raw_product.p_positive / mass;
    out.renormalized.p_negative = out.raw_product.p_negative / mass;
    return out;
}

CrossCheckedPrediction
cross_check_from(const model::TaskDistribution& base,
                 const std::vector<nli::NLIDistribution>& selected_distributions,
                 const corpus::RationaleMask& mask) {
    CrossCheckedPrediction out;
    out.base_task_dist = base;
    out.mask = mask;
    out.n_selected = static_cast<int>(selected_distributions.size());
    out.selected_distributions = selected_distributions;

    if (selected_distributions.empty()) {
        out.fallback_used = true;
        out.scaled_task_dist = base;
        out.raw_product = base;
        out.final_label = base.argmax();
        return out;
    }

    std::vector<TwoClassNLI> reweighted;
    reweighted.reserve(selected_distributions.size());
    for (const auto& d : selected_distributions) reweighted.push_back(reweight(d));
    out.nli_aggregate = aggregate(reweighted);

    ScaleResult scaled = scale(base, out.nli_aggregate);
    out.raw_product = scaled.raw_product;
    out.scaled_task_dist = scaled.renormalized;
    out.fallback_used = scaled.fallback_used;
    out.final_label = out.scaled_task_dist.argmax();
    return out;
}

CrossCheckedPrediction cross_checked_predict(const model::EtpModel& model,
                                             nli::NLIBackend& nli_backend,
                                             const corpus::Instance& instance) {
    model::ExplainOutput ex = model.explain(instance);
    model::PredictOutput pr = model.predict(instance, ex.mask);

    // NLI distributions only for the selected sentences (Eq. 2's index set).
    std::vector<nli::PremiseHypothesis> pairs;
    std::string query_text = corpus::build_query_text(instance.query);
    for (int j = 0; j < ex.mask.size(); ++j) {
        if (ex.mask.bits[j]) {
            pairs.emplace_back(query_text, instance.document.sentences[j].text);
        }
    }
    std::vector<nli::NLIDistribution> dists;
    if (!pairs.empty()) {
        dists = nli_backend.predict_batch(pairs);
        if (dists.size() != pairs.size()) {
            throw BackendError("backend returned wrong distribution count during "
                               "cross-checking of instance " + instance.instance_id);
        }
        for (auto& d : dists) d.validate();
    }
    return cross_check_from(pr.dist, dists, ex.mask);
}

void append_trace(const CrossCheckedPrediction& pred, const std::string& instance_id,
                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError("cannot append cross-check trace: " + path.string());
    json j;
    j["instance_id"] = instance_id;
    j["base"] = {pred.base_task_dist.p_positive, pred.base_task_dist.p_negative};
    json dists = json::array();
    for (const auto& d : pred.selected_distributions) {
        dists.push_back({d.p_entail, d.p_contra, d.p_neutral});
    }
    j["selected_nli"] = dists;
    j["nli_aggregate"] = {pred.nli_aggregate.p_entail, pred.nli_aggregate.p_contra};
    j["scaled"] = {pred.scaled_task_dist.p_positive, pred.scaled_task_dist.p_negative};
    j["raw_product"] = {pred.raw_product.p_positive, pred.raw_product.p_negative};
    j["final_label"] = pred.final_label == corpus::TaskLabel::POSITIVE ? "POSITIVE"
                                                                       : "NEGATIVE";
    j["n_selected"] = pred.n_selected;
    j["fallback_used"] = pred.fallback_used;
    out << j.dump() << "\n";
}

} // namespace etp::crosscheck
