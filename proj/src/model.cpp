#include "etp/model.hpp"

#include "etp/errors.hpp"
#include "etp/evaluate.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>

namespace etp::model {

using nlohmann::json;

void TrainConfig::validate() const {
    if (lambda_weight < 0.0) throw UsageError("lambda_weight must be >= 0");
    if (learning_rate <= 0.0) throw UsageError("learning_rate must be positive");
    if (batch_size <= 0) throw UsageError("batch_size must be positive");
    if (adam_epsilon <= 0.0) throw UsageError("adam_epsilon must be positive");
    if (grad_clip_norm <= 0.0) throw UsageError("grad_clip_norm must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout must lie in [0, 1)");
    if (max_epochs <= 0) throw UsageError("max_epochs must be positive");
    if (early_stop_patience <= 0) throw UsageError("early_stop_patience must be positive");
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
        throw UsageError("warmup_fraction must lie in [0, 1]");
    }
}

AssembledInput assemble_full(const EncoderBackend& enc, const TokenizedPieces& pieces) {
    AssembledInput out;
    out.ids.push_back(enc.cls_id());
    out.ids.insert(out.ids.end(), pieces.query_ids.begin(), pieces.query_ids.end());
    out.ids.push_back(enc.sep_id());
    for (const auto& sent : pieces.sentence_ids) {
        int start = static_cast<int>(out.ids.size());
        out.ids.insert(out.ids.end(), sent.begin(), sent.end());
        out.sentence_spans.emplace_back(start, static_cast<int>(out.ids.size()));
    }
    return out;
}

AssembledInput assemble_masked(const EncoderBackend& enc, const TokenizedPieces& pieces,
                               const corpus::RationaleMask& mask) {
    if (mask.size() != static_cast<int>(pieces.sentence_ids.size())) {
        throw DataError("mask length " + std::to_string(mask.size()) +
                        " != sentence count " + std::to_string(pieces.sentence_ids.size()));
    }
    AssembledInput out;
    out.ids.push_back(enc.cls_id());
    out.ids.insert(out.ids.end(), pieces.query_ids.begin(), pieces.query_ids.end());
    out.ids.push_back(enc.sep_id());
    for (std::size_t j = 0; j < pieces.sentence_ids.size(); ++j) {
        if (!mask.bits[j]) continue;
        int start = static_cast<int>(out.ids.size());
        out.ids.insert(out.ids.end(), pieces.sentence_ids[j].begin(),
                       pieces.sentence_ids[j].end());
        out.sentence_spans.emplace_back(start, static_cast<int>(out.ids.size()));
    }
    out.empty_evidence = !mask.any();
    return out;
}

EtpModel::EtpModel(std::shared_ptr<EncoderBackend> encoder, HeadConfig cfg)
    : encoder_(std::move(encoder)), cfg_(cfg) {
    if (!encoder_) throw UsageError("EtpModel requires an encoder backend");
    if (cfg_.hidden_dim < 1) throw UsageError("head hidden_dim must be positive");
    std::mt19937_64 rng(cfg_.seed);
    const int d = encoder_->hidden_dim();
    const int dh = cfg_.hidden_dim;
    w_pool_ = nn::make_param("head.w_pool", nn::glorot_uniform(2 * d, dh, rng));
    b_pool_ = nn::make_param("head.b_pool", nn::Mat::Zero(1, dh));
    w_expl1_ = nn::make_param("head.w_expl1", nn::glorot_uniform(dh, dh, rng));
    b_expl1_ = nn::make_param("head.b_expl1", nn::Mat::Zero(1, dh));
    // Zero-initialized final layer: an untrained explainer emits probability
    // 0.5 everywhere and therefore selects nothing under the strict threshold.
    w_expl2_ = nn::make_param("head.w_expl2", nn::Mat::Zero(dh, 1));
    b_expl2_ = nn::make_param("head.b_expl2", nn::Mat::Zero(1, 1));
    w_cls_ = nn::make_param("head.w_cls", nn::glorot_uniform(d, 2, rng));
    b_cls_ = nn::make_param("head.b_cls", nn::Mat::Zero(1, 2));
}

nn::Var EtpModel::pool_sentences(const nn::Var& hidden,
                                 const std::vector<std::pair<int, int>>& spans) const {
    std::vector<int> starts;
    std::vector<int> ends;
    for (std::size_t j = 0; j < spans.size(); ++j) {
        auto [s, e] = spans[j];
        if (s < 0 || s >= e || e > hidden.rows()) {
            throw DataError("sentence " + std::to_string(j) + ": token span [" +
                            std::to_string(s) + "," + std::to_string(e) +
                            ") out of range for " + std::to_string(hidden.rows()) +
                            " hidden states");
        }
        starts.push_back(s);
        ends.push_back(e - 1); // end position inclusive
    }
    nn::Var pooled = nn::concat_cols(nn::gather_rows(hidden, starts),
                                     nn::gather_rows(hidden, ends));
    return nn::relu(nn::add_rowvec(nn::matmul(pooled, nn::from_param(w_pool_)),
                                   nn::from_param(b_pool_)));
}

nn::Var EtpModel::explainer_logits(const nn::Var& sentence_reps, double dropout_rate,
                                   std::mt19937_64& rng, bool train_mode) const {
    nn::Var x = nn::dropout(sentence_reps, dropout_rate, rng, train_mode);
    nn::Var h = nn::relu(nn::add_rowvec(nn::matmul(x, nn::from_param(w_expl1_)),
                                        nn::from_param(b_expl1_)));
    h = nn::dropout(h, dropout_rate, rng, train_mode);
    return nn::add_rowvec(nn::matmul(h, nn::from_param(w_expl2_)),
                          nn::from_param(b_expl2_));
}

nn::Var EtpModel::task_logits(const nn::Var& masked_hidden) const {
    nn::Var cls = nn::gather_rows(masked_hidden, {0});
    return nn::add_rowvec(nn::matmul(cls, nn::from_param(w_cls_)),
                          nn::from_param(b_cls_));
}

ExplainOutput EtpModel::explain(const corpus::Instance& instance) const {
    std::mt19937_64 rng(0); // inference mode draws nothing
    TokenizedPieces pieces = encoder_->tokenize(instance.query, instance.document);
    AssembledInput full = assemble_full(*encoder_, pieces);
    nn::Var hidden = encoder_->encode(full.ids, false, rng);
    nn::Var reps = pool_sentences(hidden, full.sentence_spans);
    nn::Var logits = explainer_logits(reps, 0.0, rng, false);
    nn::Var probs = nn::sigmoid(logits);

    ExplainOutput out;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        double p = probs.value()(i, 0);
        out.probs.push_back(p);
        out.mask.bits.push_back(p > 0.5 ? 1 : 0);
    }
    return out;
}

PredictOutput EtpModel::predict(const corpus::Instance& instance,
                                const corpus::RationaleMask& mask) const {
    std::mt19937_64 rng(0);
    TokenizedPieces pieces = encoder_->tokenize(instance.query, instance.document);
    AssembledInput masked = assemble_masked(*encoder_, pieces, mask);
    nn::Var hidden = encoder_->encode(masked.ids, false, rng);
    nn::Var logits = task_logits(hidden);

    double m = logits.value().row(0).maxCoeff();
    double e0 = std::exp(logits.value()(0, 0) - m);
    double e1 = std::exp(logits.value()(0, 1) - m);
    PredictOutput out;
    out.dist.p_positive = e0 / (e0 + e1);
    out.dist.p_negative = e1 / (e0 + e1);
    out.empty_evidence = masked.empty_evidence;
    return out;
}

LossBundle EtpModel::compute_losses(const corpus::Instance& instance,
                                    const corpus::RationaleMask& pseudo_target,
                                    double lambda_weight, MaskSource mask_source,
                                    double dropout_rate, std::mt19937_64& rng,
                                    bool train_mode) const {
    const int n = instance.document.size();
    if (pseudo_target.size() != n) {
        throw DataError("instance " + instance.instance_id + ": pseudo-target length " +
                        std::to_string(pseudo_target.size()) + " != sentence count " +
                        std::to_string(n));
    }
    TokenizedPieces pieces = encoder_->tokenize(instance.query, instance.document);
    AssembledInput full = assemble_full(*encoder_, pieces);
    nn::Var hidden = encoder_->encode(full.ids, train_mode, rng);
    nn::Var reps = pool_sentences(hidden, full.sentence_spans);
    nn::Var logits = explainer_logits(reps, dropout_rate, rng, train_mode);
    nn::Var probs = nn::sigmoid(logits);

    nn::Mat targets(n, 1);
    for (int i = 0; i < n; ++i) targets(i, 0) = pseudo_target.bits[i] ? 1.0 : 0.0;
    nn::Var l_expl = nn::binary_cross_entropy_mean(probs, targets);

    corpus::RationaleMask predictor_mask = pseudo_target;
    if (mask_source == MaskSource::EXPLAINER_HARD) {
        predictor_mask.bits.clear();
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            predictor_mask.bits.push_back(probs.value()(i, 0) > 0.5 ? 1 : 0);
        }
    }
    AssembledInput masked = assemble_masked(*encoder_, pieces, predictor_mask);
    nn::Var masked_hidden = encoder_->encode(masked.ids, train_mode, rng);
    nn::Var t_logits = task_logits(masked_hidden);
    int target_idx = instance.label == corpus::TaskLabel::POSITIVE ? 0 : 1;
    nn::Var l_pred = nn::softmax_cross_entropy(t_logits, target_idx);

    nn::Var l_total = nn::add(l_pred, nn::scalar_mul(l_expl, lambda_weight));

    LossBundle out{l_total, l_pred, l_expl, nn::scalar(l_total), nn::scalar(l_pred),
                   nn::scalar(l_expl)};
    if (!std::isfinite(out.total_value)) {
        throw BackendError("non-finite loss on instance " + instance.instance_id +
                           " (pred=" + std::to_string(out.pred_value) +
                           ", expl=" + std::to_string(out.expl_value) + ")");
    }
    return out;
}

std::vector<nn::NodePtr> EtpModel::parameters() const {
    std::vector<nn::NodePtr> out = encoder_->parameters();
    for (const auto& p : {w_pool_, b_pool_, w_expl1_, b_expl1_, w_expl2_, b_expl2_,
                          w_cls_, b_cls_}) {
        out.push_back(p);
    }
    return out;
}

std::string EtpModel::fingerprint() const {
    return encoder_->fingerprint() + "|heads:dh=" + std::to_string(cfg_.hidden_dim) +
           ":seed=" + std::to_string(cfg_.seed);
}

corpus::RationaleMask GoldTargetProvider::target_for(const corpus::Instance& instance) {
    if (!instance.gold_rationale) {
        throw DataError("instance " + instance.instance_id +
                        " has no gold rationale for supervised training");
    }
    return *instance.gold_rationale;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

struct ValMetrics {
    double total = 0.0;
    double pred = 0.0;
    double expl = 0.0;
    double task_f1 = 0.0;
    double sentence_f1 = 0.0;
};

ValMetrics validate_epoch(const EtpModel& model,
                          const corpus::DatasetSplit& val_split,
                          const std::vector<corpus::RationaleMask>& val_targets,
                          const TrainConfig& config) {
    std::mt19937_64 rng(0);
    ValMetrics m;
    std::vector<corpus::TaskLabel> pred_labels;
    std::vector<corpus::TaskLabel> gold_labels;
    double f1_sum = 0.0;
    for (std::size_t i = 0; i < val_split.instances.size(); ++i) {
        const auto& inst = val_split.instances[i];
        LossBundle losses = model.compute_losses(inst, val_targets[i], config.lambda_weight,
                                                 config.mask_source, 0.0, rng, false);
        m.total += losses.total_value;
        m.pred += losses.pred_value;
        m.expl += losses.expl_value;

        ExplainOutput ex = model.explain(inst);
        PredictOutput pr = model.predict(inst, ex.mask);
        pred_labels.push_back(pr.dist.argmax());
        gold_labels.push_back(inst.label);
        f1_sum += evaluate::sentence_f1(ex.mask, val_targets[i]);
    }
    const double n = static_cast<double>(val_split.instances.size());
    m.total /= n;
    m.pred /= n;
    m.expl /= n;
    m.task_f1 = evaluate::binary_macro_f1(pred_labels, gold_labels);
    m.sentence_f1 = f1_sum / n;
    return m;
}

} // namespace

TrainResult train(EtpModel& model, const corpus::DatasetSplit& train_split,
                  const corpus::DatasetSplit& val_split,
                  PseudoTargetProvider& targets, const TrainConfig& config) {
    config.validate();
    if (train_split.instances.empty()) throw DataError("train split is empty");
    if (val_split.instances.empty()) throw DataError("validation split is empty");

    // Annotate once up front; the provider caches behind this call.
    std::vector<corpus::RationaleMask> train_targets;
    for (const auto& inst : train_split.instances) {
        train_targets.push_back(targets.target_for(inst));
    }
    std::vector<corpus::RationaleMask> val_targets;
    for (const auto& inst : val_split.instances) {
        val_targets.push_back(targets.target_for(inst));
    }

    std::vector<nn::NodePtr> params = model.parameters();
    nn::AdamWConfig opt_cfg;
    opt_cfg.lr = config.learning_rate;
    opt_cfg.eps = config.adam_epsilon;
    opt_cfg.weight_decay = config.weight_decay;
    nn::AdamW opt(params, opt_cfg);

    const int n = static_cast<int>(train_split.instances.size());
    const int batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const long total_steps = static_cast<long>(batches_per_epoch) * config.max_epochs;
    const long warmup_steps =
        static_cast<long>(std::llround(config.warmup_fraction * total_steps));

    std::mt19937_64 rng(config.seed);

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<nn::Mat> best_values;
    int strikes = 0;
    long step = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double ep_total = 0.0;
        double ep_pred = 0.0;
        double ep_expl = 0.0;
        for (int b = 0; b < batches_per_epoch; ++b) {
            int lo = b * config.batch_size;
            int hi = std::min(n, lo + config.batch_size);
            opt.zero_grad();
            nn::Var batch_loss = nn::constant(nn::Mat::Zero(1, 1));
            for (int k = lo; k < hi; ++k) {
                const auto& inst = train_split.instances[order[k]];
                LossBundle losses =
                    model.compute_losses(inst, train_targets[order[k]],
                                         config.lambda_weight, config.mask_source,
                                         config.dropout, rng, true);
                batch_loss = nn::add(batch_loss, losses.total);
                ep_total += losses.total_value;
                ep_pred += losses.pred_value;
                ep_expl += losses.expl_value;
            }
            batch_loss = nn::scalar_mul(batch_loss, 1.0 / (hi - lo));
            nn::backward(batch_loss);
            opt.clip_grad_norm(config.grad_clip_norm);
            ++step;
            double lr_scale = (warmup_steps > 0 && step <= warmup_steps)
                                  ? static_cast<double>(step) / warmup_steps
                                  : 1.0;
            opt.step(lr_scale);
        }

        ValMetrics vm = validate_epoch(model, val_split, val_targets, config);

        EpochLog log;
        log.epoch = epoch;
        log.train_total = ep_total / n;
        log.train_pred = ep_pred / n;
        log.train_expl = ep_expl / n;
        log.val_total = vm.total;
        log.val_pred = vm.pred;
        log.val_expl = vm.expl;
        log.val_task_f1 = vm.task_f1;
        log.val_sentence_f1_vs_pseudo = vm.sentence_f1;
        result.log.push_back(log);
        result.epochs_run = epoch;

        if (vm.total < best_val) {
            best_val = vm.total;
            result.best_epoch = epoch;
            result.best_val_total = vm.total;
            best_values.clear();
            for (const auto& p : params) best_values.push_back(p->value);
            strikes = 0;
        } else {
            ++strikes;
            if (strikes >= config.early_stop_patience) break;
        }
    }

    if (!best_values.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kWeightsMagic[] = "ETPW1";

std::string mask_source_name(MaskSource m) {
    return m == MaskSource::PSEUDO_TARGET ? "pseudo_target" : "explainer_hard";
}

MaskSource parse_mask_source(const std::string& s) {
    if (s == "pseudo_target") return MaskSource::PSEUDO_TARGET;
    if (s == "explainer_hard") return MaskSource::EXPLAINER_HARD;
    throw DataError("unknown mask source: " + s);
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"lambda_weight", c.lambda_weight},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"adam_epsilon", c.adam_epsilon},
                {"grad_clip_norm", c.grad_clip_norm},
                {"dropout", c.dropout},
                {"max_epochs", c.max_epochs},
                {"early_stop_patience", c.early_stop_patience},
                {"warmup_fraction", c.warmup_fraction},
                {"seed", c.seed},
                {"mask_source", mask_source_name(c.mask_source)},
                {"weight_decay", c.weight_decay}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.lambda_weight = j.at("lambda_weight").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.adam_epsilon = j.at("adam_epsilon").get<double>();
    c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    c.dropout = j.at("dropout").get<double>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.early_stop_patience = j.at("early_stop_patience").get<int>();
    c.warmup_fraction = j.at("warmup_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mask_source = parse_mask_source(j.at("mask_source").get<std::string>());
    c.weight_decay = j.value("weight_decay", 0.0);
    return c;
}

} // namespace

void save_weights(const std::vector<nn::NodePtr>& params,
                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write weights file: " + path.string());
    out.write(kWeightsMagic, 5);
    std::uint32_t count = static_cast<std::uint32_t>(params.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& p : params) {
        std::uint32_t name_len = static_cast<std::uint32_t>(p->name.size());
        out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
        out.write(p->name.data(), name_len);
        std::int64_t rows = p->value.rows();
        std::int64_t cols = p->value.cols();
        out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
        out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                double v = p->value(i, j);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        }
    }
}

void load_weights(const std::vector<nn::NodePtr>& params,
                  const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weights file: " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (!in || std::string(magic, 5) != kWeightsMagic) {
        throw DataError("bad weights file magic: " + path.string());
    }
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (count != params.size()) {
        throw DataError("weights file has " + std::to_string(count) +
                        " tensors, model expects " + std::to_string(params.size()));
    }
    std::map<std::string, nn::NodePtr> by_name;
    for (const auto& p : params) by_name[p->name] = p;
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::int64_t rows = 0;
        std::int64_t cols = 0;
        in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
        in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("unexpected tensor in weights: " + name);
        if (it->second->value.rows() != rows || it->second->value.cols() != cols) {
            throw DataError("shape mismatch for tensor " + name);
        }
        for (std::int64_t i = 0; i < rows; ++i) {
            for (std::int64_t j = 0; j < cols; ++j) {
                double v = 0.0;
                in.read(reinterpret_cast<char*>(&v), sizeof(v));
                it->second->value(i, j) = v;
            }
        }
        if (!in) throw DataError("truncated weights file: " + path.string());
    }
}

void save_checkpoint(const EtpModel& model, const CheckpointManifest& manifest,
                     const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_weights(model.parameters(), dir / "weights.bin");
    json j;
    j["encoder_fingerprint"] = manifest.encoder_fingerprint;
    j["targets_fingerprint"] = manifest.targets_fingerprint;
    j["encoder_config"] = {{"vocab_buckets", manifest.encoder_config.vocab_buckets},
                           {"dim", manifest.encoder_config.dim},
                           {"layers", manifest.encoder_config.layers},
                           {"ffn_mult", manifest.encoder_config.ffn_mult},
                           {"seed", manifest.encoder_config.seed}};
    j["head_config"] = {{"hidden_dim", manifest.head_config.hidden_dim},
                        {"seed", manifest.head_config.seed}};
    j["train_config"] = train_config_to_json(manifest.train_config);
    j["epoch"] = manifest.epoch;
    j["val_total"] = manifest.val_total;
    j["val_task_f1"] = manifest.val_task_f1;
    j["val_sentence_f1"] = manifest.val_sentence_f1;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write manifest: " + (dir / "manifest.json").string());
    out << j.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("cannot open manifest: " + (dir / "manifest.json").string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("malformed manifest in " + dir.string());

    CheckpointManifest manifest;
    manifest.encoder_fingerprint = j.at("encoder_fingerprint").get<std::string>();
    manifest.targets_fingerprint = j.value("targets_fingerprint", std::string{});
    const json& ec = j.at("encoder_config");
    manifest.encoder_config.vocab_buckets = ec.at("vocab_buckets").get<int>();
    manifest.encoder_config.dim = ec.at("dim").get<int>();
    manifest.encoder_config.layers = ec.at("layers").get<int>();
    manifest.encoder_config.ffn_mult = ec.at("ffn_mult").get<int>();
    manifest.encoder_config.seed = ec.at("seed").get<std::uint64_t>();
    const json& hc = j.at("head_config");
    manifest.head_config.hidden_dim = hc.at("hidden_dim").get<int>();
    manifest.head_config.seed = hc.at("seed").get<std::uint64_t>();
    manifest.train_config = train_config_from_json(j.at("train_config"));
    manifest.epoch = j.at("epoch").get<int>();
    manifest.val_total = j.at("val_total").get<double>();
    manifest.val_task_f1 = j.value("val_task_f1", 0.0);
    manifest.val_sentence_f1 = j.value("val_sentence_f1", 0.0);

    if (manifest.encoder_fingerprint.rfind("tiny-encoder", 0) != 0) {
        throw BackendError("checkpoint was produced with a non-tiny encoder (" +
                           manifest.encoder_fingerprint +
                           "); this build can only restore tiny encoders");
    }
    auto encoder = std::make_shared<TinyEncoder>(manifest.encoder_config);
    auto model = std::make_shared<EtpModel>(encoder, manifest.head_config);
    load_weights(model->parameters(), dir / "weights.bin");
    return LoadedCheckpoint{std::move(model), std::move(manifest)};
}

} // namespace etp::model
