#include "etp/synthetic.hpp"

#include "etp/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <random>

namespace etp::synthetic {

using nlohmann::json;

namespace {

const std::vector<std::string> kTopics = {
    "harbor",  "orchard", "railway",  "library",  "stadium", "reactor",
    "granary", "bridge",  "aqueduct", "windmill", "quarry",  "foundry",
    "museum",  "canal",   "depot",    "pavilion", "brewery", "sawmill",
    "vineyard", "lighthouse", "terrace", "garrison", "archive", "observatory",
};

const std::vector<std::string> kSubstituteNouns = {
    "chimney", "parlor", "shipyard", "tollgate", "cistern", "belfry",
    "armory",  "grotto", "causeway", "lagoon",   "bastion", "atrium",
};

const std::vector<std::string> kFillerTemplates = {
    "the staff discussed the # budget during a long lunch .",
    "a short memo about the # schedule was filed without comment .",
    "several visitors toured the # grounds on a quiet afternoon .",
    "maintenance crews inspected the # fences earlier that week .",
    "an intern catalogued old photographs of the # archives .",
    "the newsletter mentioned the # picnic in passing .",
};

std::string fill(const std::string& tmpl, const std::string& topic) {
    std::string out = tmpl;
    auto pos = out.find('#');
    out.replace(pos, 1, topic);
    return out;
}

} // namespace

std::map<corpus::SplitName, corpus::DatasetSplit> generate(const SyntheticConfig& config) {
    if (config.n_instances < 3) throw UsageError("synthetic dataset needs >= 3 instances");
    if (config.n_sentences < 2) throw UsageError("synthetic documents need >= 2 sentences");
    if (config.train_fraction <= 0.0 || config.val_fraction <= 0.0 ||
        config.train_fraction + config.val_fraction >= 1.0) {
        throw UsageError("synthetic split fractions must be positive and sum below 1");
    }

    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick_topic(0, kTopics.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_filler(0, kFillerTemplates.size() - 1);
    std::uniform_int_distribution<int> pick_pos(0, config.n_sentences - 1);

    std::vector<corpus::Instance> instances;
    for (int i = 0; i < config.n_instances; ++i) {
        const std::string& topic = kTopics[pick_topic(rng)];
        bool positive = (i % 2 == 0); // balanced labels
        int rationale_pos = pick_pos(rng);

        std::vector<std::string> sentences;
        for (int s = 0; s < config.n_sentences; ++s) {
            if (s == rationale_pos) {
                sentences.push_back("the council " +
                                    std::string(positive ? "approved" : "rejected") +
                                    " the " + topic + " proposal after review .");
            } else {
                std::string other = topic;
                while (other == topic) other = kTopics[pick_topic(rng)];
                sentences.push_back(fill(kFillerTemplates[pick_filler(rng)], other));
            }
        }

        corpus::RationaleMask gold = corpus::RationaleMask::zeros(config.n_sentences);
        gold.bits[rationale_pos] = 1;

        std::string id = "syn" + std::to_string(i);
        corpus::Document doc = corpus::Document::from_texts("doc_" + id, sentences);
        corpus::Query query = corpus::Query::make(
            {"the " + topic + " proposal was approved ."}, corpus::TaskKind::SYNTHETIC);
        instances.push_back(corpus::Instance::make(
            id, std::move(doc), std::move(query),
            positive ? corpus::TaskLabel::POSITIVE : corpus::TaskLabel::NEGATIVE,
            std::move(gold)));
    }

    std::shuffle(instances.begin(), instances.end(), rng);
    int n_train = static_cast<int>(config.train_fraction * config.n_instances);
    int n_val = static_cast<int>(config.val_fraction * config.n_instances);
    n_train = std::max(1, n_train);
    n_val = std::max(1, n_val);

    std::map<corpus::SplitName, corpus::DatasetSplit> out;
    out[corpus::SplitName::TRAIN].split_name = corpus::SplitName::TRAIN;
    out[corpus::SplitName::VAL].split_name = corpus::SplitName::VAL;
    out[corpus::SplitName::TEST].split_name = corpus::SplitName::TEST;
    for (int i = 0; i < static_cast<int>(instances.size()); ++i) {
        if (i < n_train) {
            out[corpus::SplitName::TRAIN].instances.push_back(std::move(instances[i]));
        } else if (i < n_train + n_val) {
            out[corpus::SplitName::VAL].instances.push_back(std::move(instances[i]));
        } else {
            out[corpus::SplitName::TEST].instances.push_back(std::move(instances[i]));
        }
    }
    return out;
}

adversary::SubstitutionLexicon topic_lexicon() {
    adversary::SubstitutionLexicon lex;
    for (std::size_t i = 0; i < kTopics.size(); ++i) {
        // Two substitutes per topic, cycled through the disjoint noun pool.
        lex.add(kTopics[i], {kSubstituteNouns[i % kSubstituteNouns.size()],
                             kSubstituteNouns[(i + 5) % kSubstituteNouns.size()]});
    }
    return lex;
}

void write_eraser_format(const std::map<corpus::SplitName, corpus::DatasetSplit>& splits,
                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "docs");
    for (const auto& [name, split] : splits) {
        std::ofstream ann(dir / (corpus::split_name_str(name) + ".jsonl"));
        if (!ann) throw DataError("cannot write synthetic annotations under " + dir.string());
        for (const auto& inst : split.instances) {
            std::ofstream doc(dir / "docs" / inst.document.doc_id);
            for (const auto& s : inst.document.sentences) doc << s.text << "\n";

            json evidences = json::array();
            json group = json::array();
            for (const auto& span : corpus::mask_to_spans(*inst.gold_rationale)) {
                group.push_back({{"docid", inst.document.doc_id},
                                 {"start_sentence", span.start_sentence},
                                 {"end_sentence", span.end_sentence}});
            }
            evidences.push_back(group);

            json rec;
            rec["annotation_id"] = inst.instance_id;
            rec["docids"] = {inst.document.doc_id};
            rec["query"] = corpus::build_query_text(inst.query);
            rec["classification"] = corpus::label_surface(inst.query.task_kind, inst.label);
            rec["evidences"] = evidences;
            ann << rec.dump() << "\n";
        }
    }
}

} // namespace etp::synthetic
