#include "etp/config.hpp"

#include "etp/errors.hpp"
#include "etp/text.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>

namespace etp::config {

using nlohmann::json;

namespace {

json default_config_json() {
    json j;
    j["task"] = "synthetic";
    j["data_dir"] = "";
    j["output_dir"] = "";
    j["supervision_fraction"] = 0.1;
    j["seed"] = 7;
    j["nli"] = {{"kind", "mock"}, {"noise", 0.0}, {"seed", 1}, {"server_url", ""},
                {"model", ""}};
    j["encoder"] = {{"kind", "tiny"},
                    {"vocab_buckets", 4096},
                    {"dim", 32},
                    {"layers", 2},
                    {"ffn_mult", 2},
                    {"seed", 1}};
    j["head"] = {{"hidden_dim", 64}, {"seed", 1}};
    j["train"] = {{"lambda_weight", 1.0},  {"learning_rate", 2e-5},
                  {"batch_size", 8},       {"adam_epsilon", 1e-8},
                  {"grad_clip_norm", 1.0}, {"dropout", 0.2},
                  {"max_epochs", 10},      {"early_stop_patience", 3},
                  {"warmup_fraction", 0.1},{"seed", 1},
                  {"mask_source", "pseudo_target"}, {"weight_decay", 0.0}};
    j["finetune"] = {{"learning_rate", 2e-5}, {"batch_size", 8}, {"max_epochs", 10},
                     {"early_stop_patience", 3}, {"seed", 1},
                     {"neutral_keep_fraction", 1.0}};
    j["cross_check"] = false;
    j["truncation"] = {{"enabled", false}, {"max_sentences", 15}};
    return j;
}

void deep_merge(json& base, const json& patch) {
    if (!patch.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it->is_object()) {
            deep_merge(base[it.key()], *it);
        } else {
            base[it.key()] = *it;
        }
    }
}

void apply_override(json& base, const std::string& dotted, const std::string& value) {
    json* cur = &base;
    std::string remaining = dotted;
    while (true) {
        auto dot = remaining.find('.');
        if (dot == std::string::npos) break;
        std::string head = remaining.substr(0, dot);
        remaining = remaining.substr(dot + 1);
        if (!cur->contains(head)) (*cur)[head] = json::object();
        cur = &(*cur)[head];
    }
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value; // treat as plain string
    (*cur)[remaining] = parsed;
}

RunConfig from_json(const json& j) {
    RunConfig c;
    c.task = corpus::parse_task_kind(j.at("task").get<std::string>());
    c.data_dir = j.at("data_dir").get<std::string>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.supervision_fraction = j.at("supervision_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();

    const json& n = j.at("nli");
    std::string nli_kind = text::to_lower(n.at("kind").get<std::string>());
    if (nli_kind == "mock") {
        c.nli.kind = NLIKind::MOCK;
    } else if (nli_kind == "external") {
        c.nli.kind = NLIKind::EXTERNAL;
    } else {
        throw UsageError("nli.kind must be 'mock' or 'external', got '" + nli_kind + "'");
    }
    c.nli.mock_noise_rho = n.at("noise").get<double>();
    c.nli.mock_seed = n.at("seed").get<std::uint64_t>();
    c.nli.server_url = n.at("server_url").get<std::string>();
    c.nli.model = n.at("model").get<std::string>();

    const json& e = j.at("encoder");
    std::string enc_kind = text::to_lower(e.at("kind").get<std::string>());
    if (enc_kind == "tiny") {
        c.encoder.kind = EncoderKind::TINY;
    } else if (enc_kind == "external") {
        c.encoder.kind = EncoderKind::EXTERNAL;
    } else {
        throw UsageError("encoder.kind must be 'tiny' or 'external', got '" + enc_kind + "'");
    }
    c.encoder.tiny.vocab_buckets = e.at("vocab_buckets").get<int>();
    c.encoder.tiny.dim = e.at("dim").get<int>();
    c.encoder.tiny.layers = e.at("layers").get<int>();
    c.encoder.tiny.ffn_mult = e.at("ffn_mult").get<int>();
    c.encoder.tiny.seed = e.at("seed").get<std::uint64_t>();

    const json& h = j.at("head");
    c.head.hidden_dim = h.at("hidden_dim").get<int>();
    c.head.seed = h.at("seed").get<std::uint64_t>();

    const json& t = j.at("train");
    c.train.lambda_weight = t.at("lambda_weight").get<double>();
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.adam_epsilon = t.at("adam_epsilon").get<double>();
    c.train.grad_clip_norm = t.at("grad_clip_norm").get<double>();
    c.train.dropout = t.at("dropout").get<double>();
    c.train.max_epochs = t.at("max_epochs").get<int>();
    c.train.early_stop_patience = t.at("early_stop_patience").get<int>();
    c.train.warmup_fraction = t.at("warmup_fraction").get<double>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    std::string ms = t.at("mask_source").get<std::string>();
    if (ms == "pseudo_target") {
        c.train.mask_source = model::MaskSource::PSEUDO_TARGET;
    } else if (ms == "explainer_hard") {
        c.train.mask_source = model::MaskSource::EXPLAINER_HARD;
    } else {
        throw UsageError("train.mask_source must be 'pseudo_target' or 'explainer_hard'");
    }
    c.train.weight_decay = t.at("weight_decay").get<double>();

    const json& f = j.at("finetune");
    c.finetune.learning_rate = f.at("learning_rate").get<double>();
    c.finetune.batch_size = f.at("batch_size").get<int>();
    c.finetune.max_epochs = f.at("max_epochs").get<int>();
    c.finetune.early_stop_patience = f.at("early_stop_patience").get<int>();
    c.finetune.seed = f.at("seed").get<std::uint64_t>();
    c.finetune.neutral_keep_fraction = f.at("neutral_keep_fraction").get<double>();

    c.cross_check = j.at("cross_check").get<bool>();
    c.truncation_enabled = j.at("truncation").at("enabled").get<bool>();
    c.truncation_max_sentences = j.at("truncation").at("max_sentences").get<int>();

    if (!(c.supervision_fraction > 0.0) || c.supervision_fraction > 1.0) {
        throw UsageError("supervision_fraction must lie in (0, 1]");
    }
    if (c.truncation_enabled && c.truncation_max_sentences < 1) {
        throw UsageError("truncation.max_sentences must be >= 1");
    }
    return c;
}

} // namespace

void RunConfig::validate_paths(bool need_data, bool need_output) const {
    if (need_data) {
        if (data_dir.empty()) throw UsageError("data_dir is required");
        if (!std::filesystem::exists(data_dir)) {
            throw DataError("data_dir does not exist: " + data_dir.string());
        }
    }
    if (need_output && output_dir.empty()) throw UsageError("output_dir is required");
}

std::string RunConfig::fingerprint() const {
    std::string s = "task=" + corpus::task_kind_name(task) +
                    ";frac=" + std::to_string(supervision_fraction) +
                    ";seed=" + std::to_string(seed) +
                    ";nli=" + (nli.kind == NLIKind::MOCK
                                   ? "mock(rho=" + std::to_string(nli.mock_noise_rho) + ")"
                                   : "external") +
                    ";enc=" + (encoder.kind == EncoderKind::TINY ? "tiny" : "external") +
                    ";xcheck=" + (cross_check ? "1" : "0");
    return s + ";h=" + std::to_string(text::fnv1a64(s));
}

RunConfig load_run_config(const std::filesystem::path& config_file,
                          const std::map<std::string, std::string>& overrides) {
    json j = default_config_json();
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw DataError("cannot open config file: " + config_file.string());
        json file_json = json::parse(in, nullptr, false);
        if (file_json.is_discarded()) {
            throw DataError("malformed JSON in config file: " + config_file.string());
        }
        deep_merge(j, file_json);
    }
    for (const auto& [key, value] : overrides) apply_override(j, key, value);
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        throw UsageError(std::string("bad configuration: ") + e.what());
    }
}

RunConfig run_config_from_overrides(const std::map<std::string, std::string>& overrides) {
    return load_run_config({}, overrides);
}

std::filesystem::path cache_dir(const RunConfig& config) {
    if (const char* env = std::getenv("ETP_CACHE_DIR"); env && *env) {
        return std::filesystem::path(env);
    }
    return config.output_dir / "cache";
}

} // namespace etp::config
