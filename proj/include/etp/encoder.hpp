#pragma once

#include "etp/corpus.hpp"
#include "etp/nn.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace etp::model {

// Token ids for the query and each document sentence, before assembly into
// a full or masked input sequence.
struct TokenizedPieces {
    std::vector<int> query_ids;
    std::vector<std::vector<int>> sentence_ids;
};

// Pluggable encoder: tokenization plus trainable contextual encoding.
// Implementations own their parameters; the training loop updates them
// jointly with the task heads.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;

    virtual TokenizedPieces tokenize(const corpus::Query& query,
                                     const corpus::Document& document) const = 0;
    virtual int cls_id() const = 0;
    virtual int sep_id() const = 0;

    // Returns per-token hidden states (L x dim) as a graph node.
    virtual nn::Var encode(const std::vector<int>& token_ids, bool train_mode,
                           std::mt19937_64& rng) = 0;

    virtual int hidden_dim() const = 0;
    virtual std::vector<nn::NodePtr> parameters() = 0;
    virtual std::string fingerprint() const = 0;
};

// Deterministic small transformer: hashed word-level vocabulary, sinusoidal
// positions, single-head self-attention blocks. Intended for CPU-scale runs
// and tests; pretrained encoders plug in through the same interface.
struct TinyEncoderConfig {
    int vocab_buckets = 4096;
    int dim = 32;
    int layers = 2;
    int ffn_mult = 2;
    std::uint64_t seed = 1;
};

class TinyEncoder : public EncoderBackend {
public:
    explicit TinyEncoder(TinyEncoderConfig cfg);

    TokenizedPieces tokenize(const corpus::Query& query,
                             const corpus::Document& document) const override;
    int cls_id() const override { return 0; }
    int sep_id() const override { return 1; }

    nn::Var encode(const std::vector<int>& token_ids, bool train_mode,
                   std::mt19937_64& rng) override;

    int hidden_dim() const override { return cfg_.dim; }
    std::vector<nn::NodePtr> parameters() override;
    std::string fingerprint() const override;

    const TinyEncoderConfig& config() const { return cfg_; }

    int token_id(const std::string& token) const;

private:
    TinyEncoderConfig cfg_;
    nn::NodePtr embedding_;
    struct Layer {
        nn::NodePtr wq, wk, wv, wo;
        nn::NodePtr ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        nn::NodePtr ln1_g, ln1_b, ln2_g, ln2_b;
    };
    std::vector<Layer> layers_;
};

std::unique_ptr<TinyEncoder> make_tiny_encoder(const TinyEncoderConfig& cfg);

} // namespace etp::model
