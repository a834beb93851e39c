#include "etp/adversary.hpp"
#include "etp/config.hpp"
#include "etp/corpus.hpp"
#include "etp/crosscheck.hpp"
#include "etp/errors.hpp"
#include "etp/evaluate.hpp"
#include "etp/model.hpp"
#include "etp/nli.hpp"
#include "etp/nli_external.hpp"
#include "etp/synthetic.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> named;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "JSON config file");
    cmd->add_option("--set", args.sets,
                    "Override a config entry as dotted.path=value (repeatable)");
    auto named = [&args, cmd](const std::string& flag, const std::string& path,
                              const std::string& help) {
        cmd->add_option_function<std::string>(
            flag, [&args, path](const std::string& v) { args.named[path] = v; }, help);
    };
    named("--task", "task", "Task kind: fever|boolq|multirc|synthetic");
    named("--data-dir", "data_dir", "Input data directory");
    named("--out", "output_dir", "Output directory for artifacts");
    named("--seed", "seed", "Pipeline seed");
    named("--fraction", "supervision_fraction", "Fraction of annotated rationales (0,1]");
    named("--nli-kind", "nli.kind", "NLI backend: mock|external");
    named("--nli-noise", "nli.noise", "Mock oracle noise rate rho");
    named("--nli-url", "nli.server_url", "External NLI server URL");
    named("--encoder-kind", "encoder.kind", "Encoder backend: tiny|external");
    named("--epochs", "train.max_epochs", "Max training epochs");
    named("--lr", "train.learning_rate", "Learning rate");
    named("--lambda", "train.lambda_weight", "Explainer loss weight");
    named("--cross-check", "cross_check", "Enable NLI cross-checking (true|false)");
    named("--truncate", "truncation.enabled", "Enable TF-IDF truncation (true|false)");
    named("--max-sentences", "truncation.max_sentences", "Truncation window length");
}

etp::config::RunConfig resolve_config(const CommonArgs& args) {
    std::map<std::string, std::string> overrides;
    for (const auto& kv : args.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw etp::UsageError("--set expects key=value, got '" + kv + "'");
        }
        overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : args.named) overrides[k] = v;
    return etp::config::load_run_config(
        args.config_file.empty() ? fs::path{} : fs::path(args.config_file), overrides);
}

fs::path splits_dir(const etp::config::RunConfig& cfg) { return cfg.output_dir / "splits"; }

etp::corpus::SplitName parse_split(const std::string& name) {
    if (name == "train") return etp::corpus::SplitName::TRAIN;
    if (name == "val") return etp::corpus::SplitName::VAL;
    if (name == "test") return etp::corpus::SplitName::TEST;
    throw etp::UsageError("split must be train|val|test, got '" + name + "'");
}

std::vector<etp::corpus::DatasetSplit>
load_available_splits(const etp::config::RunConfig& cfg) {
    std::vector<etp::corpus::DatasetSplit> splits;
    for (auto name : {etp::corpus::SplitName::TRAIN, etp::corpus::SplitName::VAL,
                      etp::corpus::SplitName::TEST}) {
        fs::path p = splits_dir(cfg) / (etp::corpus::split_name_str(name) + ".jsonl");
        if (fs::exists(p)) splits.push_back(etp::corpus::load_split_file(p, name));
    }
    if (splits.empty()) {
        throw etp::DataError("no prepared splits under " + splits_dir(cfg).string() +
                             "; run `prepare` first");
    }
    return splits;
}

std::shared_ptr<etp::nli::NLIBackend> make_nli_backend(const etp::config::RunConfig& cfg) {
    if (cfg.nli.kind == etp::config::NLIKind::MOCK) {
        return std::make_shared<etp::nli::MockOracleBackend>(
            load_available_splits(cfg), cfg.nli.mock_noise_rho, cfg.nli.mock_seed);
    }
    if (cfg.nli.server_url.empty()) {
        throw etp::UsageError("external NLI backend requires nli.server_url "
                              "(start scripts/nli_server.py and pass its URL)");
    }
    return std::make_shared<etp::nli::ExternalNLIBackend>(cfg.nli.server_url);
}

std::shared_ptr<etp::model::EncoderBackend>
make_encoder(const etp::config::RunConfig& cfg) {
    if (cfg.encoder.kind == etp::config::EncoderKind::TINY) {
        return std::make_shared<etp::model::TinyEncoder>(cfg.encoder.tiny);
    }
    throw etp::BackendError(
        "no external encoder is linked into this build; implement EncoderBackend "
        "and register it, or use encoder.kind=tiny");
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, int instances, int sentences,
              std::uint64_t seed) {
    etp::synthetic::SyntheticConfig cfg;
    cfg.n_instances = instances;
    cfg.n_sentences = sentences;
    cfg.seed = seed;
    auto splits = etp::synthetic::generate(cfg);
    etp::synthetic::write_eraser_format(splits, out_dir);
    etp::synthetic::topic_lexicon().save(fs::path(out_dir) / "lexicon.jsonl");
    int total = 0;
    for (const auto& [name, split] : splits) total += static_cast<int>(split.instances.size());
    std::cout << "wrote " << total << " synthetic instances to " << out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

int cmd_prepare(const etp::config::RunConfig& cfg) {
    cfg.validate_paths(true, true);
    etp::corpus::LoadStats stats;
    auto splits = etp::corpus::load_eraser(cfg.data_dir, cfg.task, &stats);

    int dropped_gold = 0;
    if (cfg.truncation_enabled) {
        for (auto& [name, split] : splits) {
            for (auto& inst : split.instances) {
                auto trunc = etp::corpus::tfidf_truncate(inst.document, inst.query,
                                                         cfg.truncation_max_sentences);
                std::optional<etp::corpus::RationaleMask> gold;
                if (inst.gold_rationale) {
                    int dropped = 0;
                    gold = trunc.project_mask(*inst.gold_rationale, &dropped);
                    dropped_gold += dropped;
                }
                inst = etp::corpus::Instance::make(inst.instance_id, trunc.document,
                                                   inst.query, inst.label, std::move(gold));
            }
        }
    }

    fs::create_directories(splits_dir(cfg));
    for (const auto& [name, split] : splits) {
        etp::corpus::save_split_file(split,
                                     splits_dir(cfg) /
                                         (etp::corpus::split_name_str(name) + ".jsonl"));
    }

    auto train_it = splits.find(etp::corpus::SplitName::TRAIN);
    if (train_it == splits.end()) throw etp::DataError("dataset has no train split");
    auto subset = etp::corpus::sample_supervised_subset(train_it->second,
                                                        cfg.supervision_fraction, cfg.seed);
    etp::corpus::save_split_file(subset.labeled, splits_dir(cfg) / "labeled.jsonl");
    etp::corpus::save_split_file(subset.unlabeled, splits_dir(cfg) / "unlabeled.jsonl");

    json manifest;
    manifest["task"] = etp::corpus::task_kind_name(cfg.task);
    manifest["supervision_fraction"] = cfg.supervision_fraction;
    manifest["seed"] = cfg.seed;
    manifest["records"] = stats.records;
    manifest["skipped_bad_span"] = stats.skipped_bad_span;
    manifest["dropped_gold_sentences"] = dropped_gold;
    std::vector<std::string> labeled_ids;
    for (const auto& inst : subset.labeled.instances) labeled_ids.push_back(inst.instance_id);
    manifest["labeled_ids"] = labeled_ids;
    int pos = 0;
    for (const auto& inst : subset.labeled.instances) {
        if (inst.label == etp::corpus::TaskLabel::POSITIVE) ++pos;
    }
    manifest["labeled_positive"] = pos;
    manifest["labeled_negative"] = static_cast<int>(labeled_ids.size()) - pos;
    std::ofstream mf(cfg.output_dir / "prepare_manifest.json");
    if (!mf) throw etp::DataError("cannot write prepare manifest");
    mf << manifest.dump(2) << "\n";

    std::cout << "prepared " << stats.records << " records ("
              << stats.skipped_bad_span << " skipped for bad spans, " << dropped_gold
              << " gold sentences dropped by truncation); labeled subset: "
              << labeled_ids.size() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// finetune-nli
// ---------------------------------------------------------------------------

int cmd_finetune_nli(const etp::config::RunConfig& cfg) {
    cfg.validate_paths(false, true);
    fs::path labeled_path = splits_dir(cfg) / "labeled.jsonl";
    if (!fs::exists(labeled_path)) {
        throw etp::DataError("missing " + labeled_path.string() + "; run `prepare` first");
    }
    auto labeled = etp::corpus::load_split_file(labeled_path, etp::corpus::SplitName::TRAIN);
    auto pairs = etp::nli::build_finetune_pairs(labeled, cfg.finetune.neutral_keep_fraction,
                                                cfg.finetune.seed);
    auto backend = make_nli_backend(cfg);
    auto result = etp::nli::finetune_nli(*backend, pairs, cfg.finetune);

    json j;
    j["backend_fingerprint"] = backend->fingerprint();
    j["pairs"] = pairs.size();
    j["epochs_run"] = result.epochs_run;
    j["best_epoch"] = result.best_epoch;
    j["best_val_loss"] = result.best_val_loss;
    j["val_losses"] = result.val_losses;
    std::ofstream out(cfg.output_dir / "nli_finetune.json");
    out << j.dump(2) << "\n";
    std::cout << "fine-tuned NLI backend over " << pairs.size() << " pairs; best epoch "
              << result.best_epoch << " (val loss " << result.best_val_loss << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const etp::config::RunConfig& cfg, bool supervised) {
    cfg.validate_paths(false, true);
    auto train_split = etp::corpus::load_split_file(splits_dir(cfg) / "train.jsonl",
                                                    etp::corpus::SplitName::TRAIN);
    auto val_split = etp::corpus::load_split_file(splits_dir(cfg) / "val.jsonl",
                                                  etp::corpus::SplitName::VAL);

    auto encoder = make_encoder(cfg);
    etp::model::EtpModel model(encoder, cfg.head);

    std::unique_ptr<etp::model::PseudoTargetProvider> provider;
    std::shared_ptr<etp::nli::NLIBackend> backend;
    if (supervised) {
        provider = std::make_unique<etp::model::GoldTargetProvider>();
    } else {
        backend = make_nli_backend(cfg);
        auto cache = std::make_shared<etp::nli::PseudoAnnotationCache>(
            etp::config::cache_dir(cfg) / "pseudo_annotations.jsonl");
        provider = std::make_unique<etp::nli::NliPseudoProvider>(backend, cache);
        // The explainer trains on pseudo-targets only; drop gold up front.
        for (auto& inst : train_split.instances) inst.gold_rationale.reset();
        for (auto& inst : val_split.instances) inst.gold_rationale.reset();
    }

    auto result = etp::model::train(model, train_split, val_split, *provider, cfg.train);

    etp::model::CheckpointManifest manifest;
    manifest.encoder_fingerprint = encoder->fingerprint();
    manifest.targets_fingerprint = provider->fingerprint();
    manifest.encoder_config = cfg.encoder.tiny;
    manifest.head_config = cfg.head;
    manifest.train_config = cfg.train;
    manifest.epoch = result.best_epoch;
    manifest.val_total = result.best_val_total;
    if (!result.log.empty()) {
        const auto& best = result.log[result.best_epoch - 1];
        manifest.val_task_f1 = best.val_task_f1;
        manifest.val_sentence_f1 = best.val_sentence_f1_vs_pseudo;
    }
    etp::model::save_checkpoint(model, manifest, cfg.output_dir / "checkpoint");

    std::ofstream log_out(cfg.output_dir / "train_log.jsonl");
    for (const auto& e : result.log) {
        json j;
        j["epoch"] = e.epoch;
        j["train_total"] = e.train_total;
        j["train_pred"] = e.train_pred;
        j["train_expl"] = e.train_expl;
        j["val_total"] = e.val_total;
        j["val_pred"] = e.val_pred;
        j["val_expl"] = e.val_expl;
        j["val_task_f1"] = e.val_task_f1;
        j["val_sentence_f1_vs_pseudo"] = e.val_sentence_f1_vs_pseudo;
        log_out << j.dump() << "\n";
    }

    std::cout << "trained " << result.epochs_run << " epochs; best epoch "
              << result.best_epoch << " (val loss " << result.best_val_total
              << ", val task F1 " << manifest.val_task_f1 << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

int cmd_attack(const etp::config::RunConfig& cfg, const std::string& split_name,
               const std::string& lexicon_path) {
    cfg.validate_paths(false, true);
    auto name = parse_split(split_name);
    fs::path split_path = splits_dir(cfg) / (split_name + ".jsonl");
    if (!fs::exists(split_path)) {
        throw etp::DataError("missing split file " + split_path.string());
    }
    auto split = etp::corpus::load_split_file(split_path, name);

    etp::adversary::SubstitutionLexicon lexicon;
    if (!lexicon_path.empty()) {
        lexicon = etp::adversary::SubstitutionLexicon::load(lexicon_path);
    } else if (cfg.task == etp::corpus::TaskKind::SYNTHETIC) {
        lexicon = etp::synthetic::topic_lexicon();
    } else {
        lexicon = etp::adversary::default_lexicon();
    }

    etp::adversary::AttackOptions options;
    options.seed = cfg.seed;
    auto result = etp::adversary::build_attack_set(split, lexicon, options);
    fs::path out_path = splits_dir(cfg) / (split_name + "_attack.jsonl");
    etp::corpus::save_split_file(result.attacked, out_path);

    json j;
    j["split"] = split_name;
    j["attacked"] = result.attacked.instances.size();
    j["skipped_uncovered"] = result.skipped_uncovered;
    std::ofstream mf(cfg.output_dir / ("attack_manifest_" + split_name + ".json"));
    mf << j.dump(2) << "\n";

    std::cout << "attacked " << result.attacked.instances.size() << " instances ("
              << result.skipped_uncovered << " skipped, no covered word) -> "
              << out_path.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

int cmd_infer(const etp::config::RunConfig& cfg, const std::string& split_name,
              bool attack) {
    cfg.validate_paths(false, true);
    auto name = parse_split(split_name);
    std::string file_stem = split_name + (attack ? "_attack" : "");
    fs::path split_path = splits_dir(cfg) / (file_stem + ".jsonl");
    if (!fs::exists(split_path)) {
        throw etp::DataError("missing split file " + split_path.string() +
                             (attack ? "; run `attack` first" : "; run `prepare` first"));
    }
    auto split = etp::corpus::load_split_file(split_path, name);

    auto loaded = etp::model::load_checkpoint(cfg.output_dir / "checkpoint");
    std::shared_ptr<etp::nli::NLIBackend> backend;
    if (cfg.cross_check) backend = make_nli_backend(cfg);

    // Canonical output order.
    std::sort(split.instances.begin(), split.instances.end(),
              [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });

    fs::path preds_path = cfg.output_dir / ("preds_" + file_stem + ".jsonl");
    fs::path trace_path = cfg.output_dir / ("crosscheck_" + file_stem + ".jsonl");
    if (cfg.cross_check && fs::exists(trace_path)) fs::remove(trace_path);

    std::vector<etp::evaluate::PredictionRecord> records;
    int empty_masks = 0;
    for (const auto& inst : split.instances) {
        etp::evaluate::PredictionRecord rec;
        rec.instance_id = inst.instance_id;
        rec.gold_label = inst.label;
        rec.gold_mask = inst.gold_rationale;
        rec.attack_positions = inst.attack_positions;
        if (cfg.cross_check) {
            auto cc = etp::crosscheck::cross_checked_predict(*loaded.model, *backend, inst);
            rec.predicted_label = cc.final_label;
            rec.predicted_mask = cc.mask;
            etp::crosscheck::append_trace(cc, inst.instance_id, trace_path);
        } else {
            auto ex = loaded.model->explain(inst);
            auto pr = loaded.model->predict(inst, ex.mask);
            rec.predicted_label = pr.dist.argmax();
            rec.predicted_mask = ex.mask;
        }
        if (!rec.predicted_mask.any()) ++empty_masks;
        records.push_back(std::move(rec));
    }
    etp::evaluate::save_prediction_records(records, preds_path);
    std::cout << "wrote " << records.size() << " prediction records (" << empty_masks
              << " empty masks) -> " << preds_path.string();
    if (cfg.cross_check) std::cout << " with traces -> " << trace_path.string();
    std::cout << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const etp::config::RunConfig& cfg, const std::string& preds_path,
                 const std::string& adv_preds_path, const std::string& out_prefix) {
    auto records = etp::evaluate::load_prediction_records(preds_path);
    if (records.empty()) throw etp::DataError("no prediction records in " + preds_path);

    etp::evaluate::EvalReport report;
    auto task = etp::evaluate::task_metrics(records);
    report.accuracy = task.accuracy;
    report.macro_f1 = task.macro_f1;

    bool all_gold = true;
    bool any_gold = false;
    for (const auto& r : records) {
        all_gold = all_gold && r.gold_mask.has_value();
        any_gold = any_gold || r.gold_mask.has_value();
    }
    if (all_gold) {
        auto sf1 = etp::evaluate::corpus_sentence_f1(records);
        report.sentence_f1_macro = sf1.macro;
        report.sentence_f1_micro = sf1.micro;
    } else if (any_gold) {
        throw etp::DataError("prediction records mix present and missing gold masks");
    }

    if (!adv_preds_path.empty()) {
        auto adv = etp::evaluate::load_prediction_records(adv_preds_path);
        report.robustness = etp::evaluate::robustness(records, adv);
    }

    report.instances = static_cast<int>(records.size());
    for (const auto& r : records) {
        if (!r.predicted_mask.any()) ++report.empty_masks;
    }
    fs::path manifest_path = cfg.output_dir / "prepare_manifest.json";
    if (!cfg.output_dir.empty() && fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        json j = json::parse(in, nullptr, false);
        if (!j.is_discarded()) {
            report.dropped_gold_sentences = j.value("dropped_gold_sentences", 0);
        }
    }
    report.config_fingerprint = cfg.fingerprint();

    fs::path json_path = out_prefix + ".json";
    fs::path md_path = out_prefix + ".md";
    etp::evaluate::emit_report(report, etp::evaluate::ReportFormat::STRUCTURED, json_path);
    etp::evaluate::emit_report(report, etp::evaluate::ReportFormat::MARKDOWN, md_path);

    std::cout << "accuracy=" << report.accuracy << " macro_f1=" << report.macro_f1;
    if (report.sentence_f1_macro) {
        std::cout << " sentence_f1_macro=" << *report.sentence_f1_macro
                  << " sentence_f1_micro=" << *report.sentence_f1_micro;
    }
    if (report.robustness) {
        std::cout << " delta_task="
                  << (report.robustness->delta_task
                          ? std::to_string(*report.robustness->delta_task)
                          : "undefined")
                  << " delta_plaus="
                  << (report.robustness->delta_plaus
                          ? std::to_string(*report.robustness->delta_plaus)
                          : "undefined")
                  << " attack_rate=" << report.robustness->attack_rate;
    }
    std::cout << "\nreports -> " << json_path.string() << ", " << md_path.string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised extractive rationalization pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic separable dataset");
    std::string synth_out;
    int synth_instances = 200;
    int synth_sentences = 6;
    std::uint64_t synth_seed = 7;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--instances", synth_instances, "Number of instances");
    synth->add_option("--sentences", synth_sentences, "Sentences per document");
    synth->add_option("--seed", synth_seed, "Generator seed");

    CommonArgs prepare_args;
    auto* prepare = app.add_subcommand("prepare", "Ingest data and write canonical splits");
    add_common_options(prepare, prepare_args);

    CommonArgs ft_args;
    auto* ft = app.add_subcommand("finetune-nli", "Fine-tune the NLI backend on the "
                                                  "labeled subset");
    add_common_options(ft, ft_args);

    CommonArgs train_args;
    bool train_supervised = false;
    auto* train = app.add_subcommand("train", "Train the explain-then-predict model");
    add_common_options(train, train_args);
    train->add_flag("--supervised", train_supervised,
                    "Supervised baseline: train the explainer on gold rationales");

    CommonArgs attack_args;
    std::string attack_split = "test";
    std::string attack_lexicon;
    auto* attack = app.add_subcommand("attack", "Build an adversarial-prefix split");
    add_common_options(attack, attack_args);
    attack->add_option("--split", attack_split, "Which split to attack");
    attack->add_option("--lexicon", attack_lexicon, "Substitution lexicon file");

    CommonArgs infer_args;
    std::string infer_split = "test";
    bool infer_attack = false;
    auto* infer = app.add_subcommand("infer", "Run inference and write prediction records");
    add_common_options(infer, infer_args);
    infer->add_option("--split", infer_split, "Which split to score");
    infer->add_flag("--attack", infer_attack, "Use the split's adversarial variant");

    CommonArgs eval_args;
    std::string eval_preds;
    std::string eval_adv_preds;
    std::string eval_out = "report";
    auto* eval = app.add_subcommand("evaluate", "Compute metrics from prediction records");
    add_common_options(eval, eval_args);
    eval->add_option("--preds", eval_preds, "Prediction record file")->required();
    eval->add_option("--adv-preds", eval_adv_preds,
                     "Adversarial prediction record file (enables robustness metrics)");
    eval->add_option("--report-out", eval_out, "Output path prefix for report files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_out, synth_instances, synth_sentences, synth_seed);
        }
        if (prepare->parsed()) return cmd_prepare(resolve_config(prepare_args));
        if (ft->parsed()) return cmd_finetune_nli(resolve_config(ft_args));
        if (train->parsed()) return cmd_train(resolve_config(train_args), train_supervised);
        if (attack->parsed()) {
            return cmd_attack(resolve_config(attack_args), attack_split, attack_lexicon);
        }
        if (infer->parsed()) {
            return cmd_infer(resolve_config(infer_args), infer_split, infer_attack);
        }
        if (eval->parsed()) {
            return cmd_evaluate(resolve_config(eval_args), eval_preds, eval_adv_preds,
                                eval_out);
        }
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const etp::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const etp::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const etp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
