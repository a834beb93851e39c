#include "etp/nli.hpp"

#include "etp/errors.hpp"
#include "etp/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace etp::nli {

using labelxform::NLILabel;
using nlohmann::json;

void NLIDistribution::validate() const {
    for (double p : {p_entail, p_contra, p_neutral}) {
        if (!(p >= 0.0 && p <= 1.0) || !std::isfinite(p)) {
            throw BackendError("NLI distribution component out of [0,1]");
        }
    }
    double sum = p_entail + p_contra + p_neutral;
    if (std::abs(sum - 1.0) > 1e-6) {
        throw BackendError("NLI distribution sums to " + std::to_string(sum) +
                           ", expected 1 within 1e-6");
    }
}

NLIDistribution NLIDistribution::one_hot(NLILabel label) {
    switch (label) {
    case NLILabel::ENTAILMENT: return {1.0, 0.0, 0.0};
    case NLILabel::CONTRADICTION: return {0.0, 1.0, 0.0};
    case NLILabel::NEUTRAL: return {0.0, 0.0, 1.0};
    }
    throw BackendError("unknown NLI label");
}

NLILabel NLIDistribution::argmax() const {
    // Fixed tie-break order: ENTAILMENT > CONTRADICTION > NEUTRAL.
    if (p_entail >= p_contra && p_entail >= p_neutral) return NLILabel::ENTAILMENT;
    if (p_contra >= p_neutral) return NLILabel::CONTRADICTION;
    return NLILabel::NEUTRAL;
}

void FineTuneConfig::validate() const {
    if (learning_rate <= 0.0) throw UsageError("learning_rate must be positive");
    if (batch_size <= 0) throw UsageError("batch_size must be positive");
    if (max_epochs <= 0) throw UsageError("max_epochs must be positive");
    if (early_stop_patience <= 0) throw UsageError("early_stop_patience must be positive");
    if (neutral_keep_fraction <= 0.0 || neutral_keep_fraction > 1.0) {
        throw UsageError("neutral_keep_fraction must lie in (0, 1]");
    }
}

double NLIBackend::train_epoch(std::span<const NLIPair>, const FineTuneConfig&) {
    throw CapabilityError("backend '" + fingerprint() + "' does not support training");
}

double NLIBackend::validation_loss(std::span<const NLIPair>) {
    throw CapabilityError("backend '" + fingerprint() + "' does not support training");
}

std::string NLIBackend::save_state() {
    throw CapabilityError("backend '" + fingerprint() + "' does not support state snapshots");
}

void NLIBackend::restore_state(const std::string&) {
    throw CapabilityError("backend '" + fingerprint() + "' does not support state snapshots");
}

// ---------------------------------------------------------------------------
// Mock oracle
// ---------------------------------------------------------------------------

namespace {

std::string oracle_key(const std::string& query_text, const std::string& sentence_text) {
    return query_text + "\x1f" + sentence_text;
}

} // namespace

MockOracleBackend::MockOracleBackend(const std::vector<corpus::DatasetSplit>& splits,
                                     double noise_rho, std::uint64_t seed)
    : noise_rho_(noise_rho), seed_(seed) {
    if (noise_rho < 0.0 || noise_rho > 1.0) throw UsageError("noise rho must lie in [0,1]");
    for (const auto& split : splits) {
        for (const auto& inst : split.instances) {
            if (!inst.gold_rationale) continue;
            auto labels = labelxform::rationale_to_nli(*inst.gold_rationale, inst.label);
            std::string query_text = corpus::build_query_text(inst.query);
            for (int j = 0; j < inst.document.size(); ++j) {
                std::string key = oracle_key(query_text, inst.document.sentences[j].text);
                table_.emplace(key, labels[j]); // first occurrence wins
            }
        }
    }
    // Seeded corruption applied once, in deterministic key order, so repeated
    // queries always see the same labels.
    if (noise_rho_ > 0.0) {
        std::mt19937_64 rng(seed_);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::uniform_int_distribution<int> pick(0, 2);
        for (auto& [key, label] : table_) {
            if (coin(rng) < noise_rho_) {
                label = static_cast<NLILabel>(pick(rng));
            }
        }
    }
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [key, label] : table_) {
        h ^= text::fnv1a64(key + ":" + labelxform::nli_label_name(label));
        h *= 1099511628211ULL;
    }
    content_hash_ = h;
}

std::vector<NLIDistribution>
MockOracleBackend::predict_batch(std::span<const PremiseHypothesis> pairs) {
    std::vector<NLIDistribution> out;
    out.reserve(pairs.size());
    for (const auto& [query_text, sentence_text] : pairs) {
        auto it = table_.find(oracle_key(query_text, sentence_text));
        NLILabel label = (it == table_.end()) ? NLILabel::NEUTRAL : it->second;
        out.push_back(NLIDistribution::one_hot(label));
    }
    return out;
}

std::string MockOracleBackend::fingerprint() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", noise_rho_);
    return "mock-oracle:v1:rho=" + std::string(buf) + ":seed=" + std::to_string(seed_) +
           ":entries=" + std::to_string(table_.size()) +
           ":hash=" + std::to_string(content_hash_);
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

std::vector<NLIPair> build_finetune_pairs(const corpus::DatasetSplit& labeled) {
    std::vector<const corpus::Instance*> ordered;
    for (const auto& inst : labeled.instances) {
        if (!inst.gold_rationale) {
            throw DataError("instance " + inst.instance_id +
                            " has no gold rationale; cannot build fine-tuning pairs");
        }
        ordered.push_back(&inst);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const corpus::Instance* a, const corpus::Instance* b) {
                  return a->instance_id < b->instance_id;
              });

    std::vector<NLIPair> pairs;
    for (const corpus::Instance* inst : ordered) {
        auto labels = labelxform::rationale_to_nli(*inst->gold_rationale, inst->label);
        std::string query_text = corpus::build_query_text(inst->query);
        for (int j = 0; j < inst->document.size(); ++j) {
            NLIPair p;
            p.premise_query = query_text;
            p.hypothesis_sentence = inst->document.sentences[j].text;
            p.target = labels[j];
            p.source_instance_id = inst->instance_id;
            p.sentence_index = j;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

std::vector<NLIPair> build_finetune_pairs(const corpus::DatasetSplit& labeled,
                                          double neutral_keep_fraction,
                                          std::uint64_t seed) {
    std::vector<NLIPair> pairs = build_finetune_pairs(labeled);
    if (neutral_keep_fraction >= 1.0) return pairs;
    if (neutral_keep_fraction <= 0.0) {
        throw UsageError("neutral_keep_fraction must lie in (0, 1]");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<NLIPair> kept;
    for (auto& p : pairs) {
        if (p.target == NLILabel::NEUTRAL && coin(rng) >= neutral_keep_fraction) continue;
        kept.push_back(std::move(p));
    }
    return kept;
}

FineTuneResult finetune_nli(NLIBackend& backend, std::span<const NLIPair> pairs,
                            const FineTuneConfig& config) {
    config.validate();
    if (pairs.empty()) throw DataError("finetune_nli: no fine-tuning pairs");
    if (!backend.trainable()) {
        throw CapabilityError("backend '" + backend.fingerprint() +
                              "' cannot be fine-tuned");
    }

    // Seeded 90/10 split over pairs.
    std::vector<NLIPair> shuffled(pairs.begin(), pairs.end());
    std::mt19937_64 rng(config.seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t val_count = std::max<std::size_t>(1, shuffled.size() / 10);
    std::vector<NLIPair> val(shuffled.end() - val_count, shuffled.end());
    std::vector<NLIPair> train(shuffled.begin(), shuffled.end() - val_count);
    if (train.empty()) train = val;

    FineTuneResult result;
    double best = std::numeric_limits<double>::infinity();
    std::string best_state;
    int strikes = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        backend.train_epoch(train, config);
        double vl = backend.validation_loss(val);
        result.val_losses.push_back(vl);
        result.epochs_run = epoch;
        if (vl < best) {
            best = vl;
            result.best_epoch = epoch;
            result.best_val_loss = vl;
            best_state = backend.save_state();
            strikes = 0;
        } else {
            ++strikes;
            if (strikes >= config.early_stop_patience) break;
        }
    }
    backend.restore_state(best_state);
    return result;
}

std::vector<NLIDistribution> classify_sentences(NLIBackend& backend,
                                                const corpus::Query& query,
                                                const corpus::Document& document) {
    if (document.size() == 0) throw DataError("classify_sentences: empty document");
    std::string query_text = corpus::build_query_text(query);
    std::vector<PremiseHypothesis> pairs;
    pairs.reserve(document.sentences.size());
    for (const auto& sent : document.sentences) {
        pairs.emplace_back(query_text, sent.text);
    }
    std::vector<NLIDistribution> dists;
    try {
        dists = backend.predict_batch(pairs);
    } catch (const BackendError& e) {
        throw BackendError("NLI backend failed on document " + document.doc_id + ": " +
                           e.what());
    }
    if (dists.size() != pairs.size()) {
        throw BackendError("backend returned " + std::to_string(dists.size()) +
                           " distributions for " + std::to_string(pairs.size()) +
                           " sentences");
    }
    for (std::size_t j = 0; j < dists.size(); ++j) {
        try {
            dists[j].validate();
        } catch (const BackendError& e) {
            throw BackendError("invalid distribution for sentence " + std::to_string(j) +
                               " of document " + document.doc_id + ": " + e.what());
        }
    }
    return dists;
}

corpus::RationaleMask pseudo_annotate(NLIBackend& backend, const corpus::Instance& instance) {
    std::vector<NLIDistribution> dists =
        classify_sentences(backend, instance.query, instance.document);
    labelxform::NLILabelSequence labels;
    labels.reserve(dists.size());
    for (const auto& d : dists) labels.push_back(d.argmax());
    return labelxform::nli_to_rationale(labels, instance.label);
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

PseudoAnnotationCache::PseudoAnnotationCache(std::filesystem::path path)
    : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return; // empty cache; file created on first put
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("malformed cache record at " + path_.string() + ":" +
                            std::to_string(line_no));
        }
        CacheRecord rec;
        rec.instance_id = j.at("instance_id").get<std::string>();
        rec.backend_fingerprint = j.at("backend_fingerprint").get<std::string>();
        for (const auto& d : j.at("distributions")) {
            NLIDistribution dist{d.at(0).get<double>(), d.at(1).get<double>(),
                                 d.at(2).get<double>()};
            rec.distributions.push_back(dist);
        }
        for (int b : j.at("mask").get<std::vector<int>>()) {
            rec.mask.bits.push_back(b ? 1 : 0);
        }
        records_[{rec.backend_fingerprint, rec.instance_id}] = rec;
    }
}

std::optional<CacheRecord>
PseudoAnnotationCache::lookup(const std::string& backend_fingerprint,
                              const std::string& instance_id) const {
    auto it = records_.find({backend_fingerprint, instance_id});
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void PseudoAnnotationCache::put(const CacheRecord& record) {
    records_[{record.backend_fingerprint, record.instance_id}] = record;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to cache: " + path_.string());
    json j;
    j["instance_id"] = record.instance_id;
    j["backend_fingerprint"] = record.backend_fingerprint;
    json dists = json::array();
    for (const auto& d : record.distributions) {
        dists.push_back({d.p_entail, d.p_contra, d.p_neutral});
    }
    j["distributions"] = dists;
    j["mask"] = std::vector<int>(record.mask.bits.begin(), record.mask.bits.end());
    out << j.dump() << "\n";
}

NliPseudoProvider::NliPseudoProvider(std::shared_ptr<NLIBackend> backend,
                                     std::shared_ptr<PseudoAnnotationCache> cache)
    : backend_(std::move(backend)), cache_(std::move(cache)) {
    if (!backend_) throw UsageError("NliPseudoProvider requires a backend");
}

corpus::RationaleMask NliPseudoProvider::target_for(const corpus::Instance& instance) {
    std::string fp = backend_->fingerprint();
    if (cache_) {
        auto hit = cache_->lookup(fp, instance.instance_id);
        if (hit) {
            if (hit->mask.size() != instance.document.size()) {
                throw DataError("cache record for " + instance.instance_id +
                                " has stale mask length");
            }
            return hit->mask;
        }
    }
    std::vector<NLIDistribution> dists =
        classify_sentences(*backend_, instance.query, instance.document);
    labelxform::NLILabelSequence labels;
    for (const auto& d : dists) labels.push_back(d.argmax());
    corpus::RationaleMask mask = labelxform::nli_to_rationale(labels, instance.label);
    if (cache_) {
        cache_->put(CacheRecord{instance.instance_id, fp, dists, mask});
    }
    return mask;
}

std::string NliPseudoProvider::fingerprint() const {
    return "nli-pseudo:" + backend_->fingerprint();
}

} // namespace etp::nli
