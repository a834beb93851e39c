#include "etp/nli_external.hpp"

#include "etp/errors.hpp"
#include "etp/labelxform.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace etp::nli {

using nlohmann::json;

struct ExternalNLIBackend::Impl {
    httplib::Client client;
    explicit Impl(const std::string& url) : client(url) {}

    json get(const std::string& path) {
        auto res = client.Get(path);
        if (!res || res->status != 200) {
            throw BackendError("NLI server GET " + path + " failed" +
                               (res ? " (status " + std::to_string(res->status) + ")"
                                    : " (no response)"));
        }
        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded()) throw BackendError("NLI server returned malformed JSON");
        return j;
    }

    json post(const std::string& path, const json& body) {
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res || res->status != 200) {
            throw BackendError("NLI server POST " + path + " failed" +
                               (res ? " (status " + std::to_string(res->status) + ")"
                                    : " (no response)"));
        }
        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded()) throw BackendError("NLI server returned malformed JSON");
        return j;
    }
};

namespace {

json pairs_to_json(std::span<const NLIPair> pairs) {
    json arr = json::array();
    for (const auto& p : pairs) {
        arr.push_back({{"premise", p.premise_query},
                       {"hypothesis", p.hypothesis_sentence},
                       {"target", labelxform::nli_label_name(p.target)}});
    }
    return arr;
}

} // namespace

ExternalNLIBackend::ExternalNLIBackend(const std::string& base_url, int timeout_seconds)
    : impl_(std::make_unique<Impl>(base_url)) {
    impl_->client.set_read_timeout(timeout_seconds, 0);
    impl_->client.set_connection_timeout(10, 0);
    fingerprint_ = "external:" + impl_->get("/fingerprint").at("fingerprint").get<std::string>();
    trainable_ = impl_->get("/capabilities").value("trainable", false);
}

ExternalNLIBackend::~ExternalNLIBackend() = default;

std::vector<NLIDistribution>
ExternalNLIBackend::predict_batch(std::span<const PremiseHypothesis> pairs) {
    json body;
    json arr = json::array();
    for (const auto& [premise, hypothesis] : pairs) {
        arr.push_back({premise, hypothesis});
    }
    body["pairs"] = arr;
    json reply = impl_->post("/predict", body);
    const json& dists = reply.at("distributions");
    if (dists.size() != pairs.size()) {
        throw BackendError("NLI server returned " + std::to_string(dists.size()) +
                           " distributions for " + std::to_string(pairs.size()) + " pairs");
    }
    std::vector<NLIDistribution> out;
    for (const auto& d : dists) {
        NLIDistribution dist{d.at(0).get<double>(), d.at(1).get<double>(),
                             d.at(2).get<double>()};
        dist.validate();
        out.push_back(dist);
    }
    return out;
}

double ExternalNLIBackend::train_epoch(std::span<const NLIPair> pairs,
                                       const FineTuneConfig& cfg) {
    if (!trainable_) return NLIBackend::train_epoch(pairs, cfg);
    json body;
    body["pairs"] = pairs_to_json(pairs);
    body["config"] = {{"learning_rate", cfg.learning_rate},
                      {"batch_size", cfg.batch_size},
                      {"seed", cfg.seed}};
    return impl_->post("/train_epoch", body).at("loss").get<double>();
}

double ExternalNLIBackend::validation_loss(std::span<const NLIPair> pairs) {
    if (!trainable_) return NLIBackend::validation_loss(pairs);
    json body;
    body["pairs"] = pairs_to_json(pairs);
    return impl_->post("/validation_loss", body).at("loss").get<double>();
}

std::string ExternalNLIBackend::save_state() {
    if (!trainable_) return NLIBackend::save_state();
    return impl_->post("/save_state", json::object()).at("state_id").get<std::string>();
}

void ExternalNLIBackend::restore_state(const std::string& state) {
    if (!trainable_) {
        NLIBackend::restore_state(state);
        return;
    }
    impl_->post("/restore_state", json{{"state_id", state}});
}

} // namespace etp::nli
