#include "etp/encoder.hpp"

#include "etp/errors.hpp"
#include "etp/text.hpp"

#include <cmath>

namespace etp::model {

namespace {

constexpr int kNumSpecialTokens = 2; // CLS, SEP

nn::Mat sinusoidal_positions(int length, int dim) {
    nn::Mat pos(length, dim);
    for (int p = 0; p < length; ++p) {
        for (int i = 0; i < dim; ++i) {
            double angle = p / std::pow(10000.0, 2.0 * (i / 2) / dim);
            pos(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pos;
}

} // namespace

TinyEncoder::TinyEncoder(TinyEncoderConfig cfg) : cfg_(cfg) {
    if (cfg_.vocab_buckets <= kNumSpecialTokens || cfg_.dim < 2 || cfg_.layers < 1) {
        throw UsageError("invalid tiny encoder configuration");
    }
    std::mt19937_64 rng(cfg_.seed);
    const int d = cfg_.dim;
    embedding_ = nn::make_param("enc.embedding",
                                nn::glorot_uniform(cfg_.vocab_buckets, d, rng));
    for (int l = 0; l < cfg_.layers; ++l) {
        Layer layer;
        std::string p = "enc.layer" + std::to_string(l) + ".";
        layer.wq = nn::make_param(p + "wq", nn::glorot_uniform(d, d, rng));
        layer.wk = nn::make_param(p + "wk", nn::glorot_uniform(d, d, rng));
        layer.wv = nn::make_param(p + "wv", nn::glorot_uniform(d, d, rng));
        layer.wo = nn::make_param(p + "wo", nn::glorot_uniform(d, d, rng));
        int ff = d * cfg_.ffn_mult;
        layer.ffn_w1 = nn::make_param(p + "ffn_w1", nn::glorot_uniform(d, ff, rng));
        layer.ffn_b1 = nn::make_param(p + "ffn_b1", nn::Mat::Zero(1, ff));
        layer.ffn_w2 = nn::make_param(p + "ffn_w2", nn::glorot_uniform(ff, d, rng));
        layer.ffn_b2 = nn::make_param(p + "ffn_b2", nn::Mat::Zero(1, d));
        layer.ln1_g = nn::make_param(p + "ln1_g", nn::Mat::Ones(1, d));
        layer.ln1_b = nn::make_param(p + "ln1_b", nn::Mat::Zero(1, d));
        layer.ln2_g = nn::make_param(p + "ln2_g", nn::Mat::Ones(1, d));
        layer.ln2_b = nn::make_param(p + "ln2_b", nn::Mat::Zero(1, d));
        layers_.push_back(std::move(layer));
    }
}

int TinyEncoder::token_id(const std::string& token) const {
    std::uint64_t h = text::fnv1a64(text::to_lower(token));
    return kNumSpecialTokens +
           static_cast<int>(h % static_cast<std::uint64_t>(cfg_.vocab_buckets -
                                                           kNumSpecialTokens));
}

TokenizedPieces TinyEncoder::tokenize(const corpus::Query& query,
                                      const corpus::Document& document) const {
    TokenizedPieces pieces;
    for (const auto& tok : text::tokenize_words(corpus::build_query_text(query))) {
        pieces.query_ids.push_back(token_id(tok));
    }
    for (const auto& sent : document.sentences) {
        std::vector<int> ids;
        for (const auto& tok : text::tokenize_words(sent.text)) {
            ids.push_back(token_id(tok));
        }
        if (ids.empty()) ids.push_back(token_id("<empty>"));
        pieces.sentence_ids.push_back(std::move(ids));
    }
    return pieces;
}

nn::Var TinyEncoder::encode(const std::vector<int>& token_ids, bool train_mode,
                            std::mt19937_64& rng) {
    (void)train_mode;
    (void)rng;
    if (token_ids.empty()) throw BackendError("encode: empty token sequence");
    const int d = cfg_.dim;
    const int length = static_cast<int>(token_ids.size());

    nn::Var x = nn::gather_rows(nn::from_param(embedding_), token_ids);
    x = nn::add(x, nn::constant(sinusoidal_positions(length, d)));

    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (const Layer& layer : layers_) {
        nn::Var q = nn::matmul(x, nn::from_param(layer.wq));
        nn::Var k = nn::matmul(x, nn::from_param(layer.wk));
        nn::Var v = nn::matmul(x, nn::from_param(layer.wv));
        nn::Var scores = nn::scalar_mul(nn::matmul(q, nn::transpose(k)), scale);
        nn::Var attn = nn::row_softmax(scores);
        nn::Var ctx = nn::matmul(nn::matmul(attn, v), nn::from_param(layer.wo));
        x = nn::layer_norm_rows(nn::add(x, ctx), nn::from_param(layer.ln1_g),
                                nn::from_param(layer.ln1_b));
        nn::Var h = nn::relu(nn::add_rowvec(nn::matmul(x, nn::from_param(layer.ffn_w1)),
                                            nn::from_param(layer.ffn_b1)));
        nn::Var f = nn::add_rowvec(nn::matmul(h, nn::from_param(layer.ffn_w2)),
                                   nn::from_param(layer.ffn_b2));
        x = nn::layer_norm_rows(nn::add(x, f), nn::from_param(layer.ln2_g),
                                nn::from_param(layer.ln2_b));
    }
    return x;
}

std::vector<nn::NodePtr> TinyEncoder::parameters() {
    std::vector<nn::NodePtr> out{embedding_};
    for (auto& l : layers_) {
        for (const auto& p : {l.wq, l.wk, l.wv, l.wo, l.ffn_w1, l.ffn_b1, l.ffn_w2,
                              l.ffn_b2, l.ln1_g, l.ln1_b, l.ln2_g, l.ln2_b}) {
            out.push_back(p);
        }
    }
    return out;
}

std::string TinyEncoder::fingerprint() const {
    return "tiny-encoder:v1:vocab=" + std::to_string(cfg_.vocab_buckets) +
           ":d=" + std::to_string(cfg_.dim) + ":layers=" + std::to_string(cfg_.layers) +
           ":ffn=" + std::to_string(cfg_.ffn_mult) + ":seed=" + std::to_string(cfg_.seed);
}

std::unique_ptr<TinyEncoder> make_tiny_encoder(const TinyEncoderConfig& cfg) {
    return std::make_unique<TinyEncoder>(cfg);
}

} // namespace etp::model
