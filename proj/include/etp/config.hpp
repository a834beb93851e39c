#pragma once

#include "etp/corpus.hpp"
#include "etp/encoder.hpp"
#include "etp/model.hpp"
#include "etp/nli.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace etp::config {

enum class NLIKind { MOCK, EXTERNAL };
enum class EncoderKind { TINY, EXTERNAL };

struct NLISpec {
    NLIKind kind = NLIKind::MOCK;
    double mock_noise_rho = 0.0;
    std::uint64_t mock_seed = 1;
    std::string server_url;   // external only
    std::string model;        // informational; the server loads it
};

struct EncoderSpec {
    EncoderKind kind = EncoderKind::TINY;
    model::TinyEncoderConfig tiny;
};

struct RunConfig {
    corpus::TaskKind task = corpus::TaskKind::SYNTHETIC;
    std::filesystem::path data_dir;
    std::filesystem::path output_dir;
    double supervision_fraction = 0.1;
    std::uint64_t seed = 7;
    NLISpec nli;
    EncoderSpec encoder;
    model::HeadConfig head;
    model::TrainConfig train;
    nli::FineTuneConfig finetune;
    bool cross_check = false;
    bool truncation_enabled = false;
    int truncation_max_sentences = 15;

    void validate_paths(bool need_data, bool need_output) const;
    std::string fingerprint() const;
};

// Defaults <- config file (optional) <- dotted-path overrides
// ("train.learning_rate=0.01"). Override values are parsed as JSON scalars,
// falling back to strings.
RunConfig load_run_config(const std::filesystem::path& config_file,
                          const std::map<std::string, std::string>& overrides);

RunConfig run_config_from_overrides(const std::map<std::string, std::string>& overrides);

// Cache directory: ETP_CACHE_DIR env var when set, else <output_dir>/cache.
std::filesystem::path cache_dir(const RunConfig& config);

} // namespace etp::config
