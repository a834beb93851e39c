#include "etp/evaluate.hpp"

#include "etp/errors.hpp"
#include "etp/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace etp::evaluate {

using nlohmann::json;

double sentence_f1(const corpus::RationaleMask& pred, const corpus::RationaleMask& gold) {
    if (pred.size() != gold.size()) {
        throw DataError("sentence_f1: mask length mismatch (" + std::to_string(pred.size()) +
                        " vs " + std::to_string(gold.size()) + ")");
    }
    int tp = 0;
    int fp = 0;
    int fn = 0;
    for (int i = 0; i < pred.size(); ++i) {
        bool p = pred.bits[i] != 0;
        bool g = gold.bits[i] != 0;
        if (p && g) ++tp;
        else if (p && !g) ++fp;
        else if (!p && g) ++fn;
    }
    if (tp == 0 && fp == 0 && fn == 0) return 1.0; // both empty
    if (tp == 0) return 0.0;
    return 2.0 * tp / (2.0 * tp + fp + fn);
}

CorpusSentenceF1 corpus_sentence_f1(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw DataError("corpus_sentence_f1: no records");
    std::vector<std::string> missing;
    for (const auto& r : records) {
        if (!r.gold_mask) missing.push_back(r.instance_id);
    }
    if (!missing.empty()) {
        throw DataError("records missing gold masks: " + text::join(missing, ", "));
    }
    CorpusSentenceF1 out;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double macro_sum = 0.0;
    for (const auto& r : records) {
        macro_sum += sentence_f1(r.predicted_mask, *r.gold_mask);
        for (int i = 0; i < r.predicted_mask.size(); ++i) {
            bool p = r.predicted_mask.bits[i] != 0;
            bool g = r.gold_mask->bits[i] != 0;
            if (p && g) ++tp;
            else if (p && !g) ++fp;
            else if (!p && g) ++fn;
        }
    }
    out.macro = macro_sum / static_cast<double>(records.size());
    out.micro = (tp == 0 && fp == 0 && fn == 0)
                    ? 1.0
                    : (tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn));
    return out;
}

double binary_macro_f1(const std::vector<corpus::TaskLabel>& predicted,
                       const std::vector<corpus::TaskLabel>& gold) {
    if (predicted.size() != gold.size()) {
        throw DataError("binary_macro_f1: prediction/gold count mismatch");
    }
    double f1_sum = 0.0;
    for (corpus::TaskLabel cls : {corpus::TaskLabel::POSITIVE, corpus::TaskLabel::NEGATIVE}) {
        long tp = 0;
        long fp = 0;
        long fn = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            bool p = predicted[i] == cls;
            bool g = gold[i] == cls;
            if (p && g) ++tp;
            else if (p && !g) ++fp;
            else if (!p && g) ++fn;
        }
        double f1 = (tp == 0) ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
        f1_sum += f1;
    }
    return f1_sum / 2.0;
}

TaskMetrics task_metrics(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw DataError("task_metrics: no records");
    int correct = 0;
    std::vector<corpus::TaskLabel> pred;
    std::vector<corpus::TaskLabel> gold;
    for (const auto& r : records) {
        if (r.predicted_label == r.gold_label) ++correct;
        pred.push_back(r.predicted_label);
        gold.push_back(r.gold_label);
    }
    TaskMetrics m;
    m.accuracy = static_cast<double>(correct) / records.size();
    m.macro_f1 = binary_macro_f1(pred, gold);
    return m;
}

RobustnessMetrics robustness(const std::vector<PredictionRecord>& original,
                             const std::vector<PredictionRecord>& adversarial) {
    if (original.empty() || adversarial.empty()) {
        throw DataError("robustness: empty record set");
    }
    std::map<std::string, const PredictionRecord*> adv_by_id;
    for (const auto& r : adversarial) adv_by_id[r.instance_id] = &r;
    std::vector<PredictionRecord> adv_aligned;
    for (const auto& r : original) {
        auto it = adv_by_id.find(r.instance_id);
        if (it == adv_by_id.end()) {
            throw DataError("robustness: adversarial records missing instance " +
                            r.instance_id);
        }
        adv_aligned.push_back(*it->second);
    }
    if (adversarial.size() != original.size()) {
        throw DataError("robustness: record sets differ in size");
    }

    RobustnessMetrics out;

    double mt_orig = task_metrics(original).macro_f1;
    double mt_adv = task_metrics(adv_aligned).macro_f1;
    if (mt_orig > 0.0) out.delta_task = (mt_orig - mt_adv) / mt_orig;

    double mp_orig = corpus_sentence_f1(original).macro;
    double mp_adv = corpus_sentence_f1(adv_aligned).macro;
    if (mp_orig > 0.0) out.delta_plaus = (mp_orig - mp_adv) / mp_orig;

    int attacked = 0;
    for (const auto& r : adv_aligned) {
        bool hit = false;
        for (int pos : r.attack_positions) {
            if (pos >= 0 && pos < r.predicted_mask.size() && r.predicted_mask.bits[pos]) {
                hit = true;
                break;
            }
        }
        if (hit) ++attacked;
    }
    out.attack_rate = static_cast<double>(attacked) / adv_aligned.size();
    return out;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace {

json report_to_json(const EvalReport& r) {
    json j;
    j["task"] = {{"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}};
    if (r.sentence_f1_macro) {
        j["plausibility"] = {{"sentence_f1_macro", *r.sentence_f1_macro},
                             {"sentence_f1_micro", *r.sentence_f1_micro}};
    }
    if (r.robustness) {
        json rob;
        rob["delta_task"] = r.robustness->delta_task
                                ? json(*r.robustness->delta_task)
                                : json(nullptr);
        rob["delta_plaus"] = r.robustness->delta_plaus
                                 ? json(*r.robustness->delta_plaus)
                                 : json(nullptr);
        rob["attack_rate"] = r.robustness->attack_rate;
        j["robustness"] = rob;
    }
    j["counts"] = {{"instances", r.instances},
                   {"empty_masks", r.empty_masks},
                   {"dropped_gold_sentences", r.dropped_gold_sentences}};
    j["config_fingerprint"] = r.config_fingerprint;
    return j;
}

std::string pct(double v) {
    std::ostringstream out;
    out.precision(1);
    out << std::fixed << v * 100.0;
    return out.str();
}

std::string report_to_markdown(const EvalReport& r) {
    std::ostringstream out;
    out << "# Evaluation report\n\n";
    out << "| Metric | Value |\n|---|---|\n";
    out << "| Task accuracy | " << pct(r.accuracy) << " |\n";
    out << "| Task macro-F1 | " << pct(r.macro_f1) << " |\n";
    if (r.sentence_f1_macro) {
        out << "| Sentence-F1 (macro) | " << pct(*r.sentence_f1_macro) << " |\n";
        out << "| Sentence-F1 (micro) | " << pct(*r.sentence_f1_micro) << " |\n";
    }
    out << "\n";
    if (r.robustness) {
        out << "## Robustness\n\n";
        out << "| Delta_T | Delta_P | AR |\n|---|---|---|\n| ";
        out << (r.robustness->delta_task ? pct(*r.robustness->delta_task) : "undefined");
        out << " | ";
        out << (r.robustness->delta_plaus ? pct(*r.robustness->delta_plaus) : "undefined");
        out << " | " << pct(r.robustness->attack_rate) << " |\n\n";
    }
    out << "Instances: " << r.instances << ", empty masks: " << r.empty_masks
        << ", dropped gold sentences: " << r.dropped_gold_sentences << "\n";
    if (!r.config_fingerprint.empty()) {
        out << "\nConfig: `" << r.config_fingerprint << "`\n";
    }
    return out.str();
}

} // namespace

void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path.string());
    if (format == ReportFormat::STRUCTURED) {
        out << report_to_json(report).dump(2) << "\n";
    } else {
        out << report_to_markdown(report);
    }
    if (!out) throw DataError("failed writing report: " + path.string());
}

EvalReport parse_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("malformed report JSON: " + path.string());
    EvalReport r;
    r.accuracy = j.at("task").at("accuracy").get<double>();
    r.macro_f1 = j.at("task").at("macro_f1").get<double>();
    if (j.contains("plausibility")) {
        r.sentence_f1_macro = j["plausibility"].at("sentence_f1_macro").get<double>();
        r.sentence_f1_micro = j["plausibility"].at("sentence_f1_micro").get<double>();
    }
    if (j.contains("robustness")) {
        RobustnessMetrics rob;
        const json& jr = j["robustness"];
        if (!jr.at("delta_task").is_null()) rob.delta_task = jr["delta_task"].get<double>();
        if (!jr.at("delta_plaus").is_null()) rob.delta_plaus = jr["delta_plaus"].get<double>();
        rob.attack_rate = jr.at("attack_rate").get<double>();
        r.robustness = rob;
    }
    r.instances = j.at("counts").at("instances").get<int>();
    r.empty_masks = j.at("counts").at("empty_masks").get<int>();
    r.dropped_gold_sentences = j.at("counts").at("dropped_gold_sentences").get<int>();
    r.config_fingerprint = j.value("config_fingerprint", std::string{});
    return r;
}

void save_prediction_records(const std::vector<PredictionRecord>& records,
                             const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write prediction records: " + path.string());
    for (const auto& r : records) {
        json j;
        j["instance_id"] = r.instance_id;
        j["predicted_label"] = r.predicted_label == corpus::TaskLabel::POSITIVE
                                   ? "POSITIVE"
                                   : "NEGATIVE";
        j["predicted_mask"] = std::vector<int>(r.predicted_mask.bits.begin(),
                                               r.predicted_mask.bits.end());
        j["gold_label"] = r.gold_label == corpus::TaskLabel::POSITIVE ? "POSITIVE"
                                                                      : "NEGATIVE";
        if (r.gold_mask) {
            j["gold_mask"] = std::vector<int>(r.gold_mask->bits.begin(),
                                              r.gold_mask->bits.end());
        }
        if (!r.attack_positions.empty()) j["attack_positions"] = r.attack_positions;
        out << j.dump() << "\n";
    }
}

std::vector<PredictionRecord> load_prediction_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open prediction records: " + path.string());
    std::vector<PredictionRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("malformed prediction record at " + path.string() + ":" +
                            std::to_string(line_no));
        }
        PredictionRecord r;
        r.instance_id = j.at("instance_id").get<std::string>();
        r.predicted_label = corpus::parse_label_surface(j.at("predicted_label").get<std::string>());
        for (int b : j.at("predicted_mask").get<std::vector<int>>()) {
            r.predicted_mask.bits.push_back(b ? 1 : 0);
        }
        r.gold_label = corpus::parse_label_surface(j.at("gold_label").get<std::string>());
        if (j.contains("gold_mask")) {
            corpus::RationaleMask m;
            for (int b : j["gold_mask"].get<std::vector<int>>()) m.bits.push_back(b ? 1 : 0);
            r.gold_mask = std::move(m);
        }
        if (j.contains("attack_positions")) {
            r.attack_positions = j["attack_positions"].get<std::vector<int>>();
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace etp::evaluate
