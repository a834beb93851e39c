#include "etp/labelxform.hpp"

#include "etp/errors.hpp"

namespace etp::labelxform {

std::string nli_label_name(NLILabel l) {
    switch (l) {
    case NLILabel::ENTAILMENT: return "entailment";
    case NLILabel::CONTRADICTION: return "contradiction";
    case NLILabel::NEUTRAL: return "neutral";
    }
    throw DataError("unknown NLI label");
}

NLILabel parse_nli_label(const std::string& name) {
    if (name == "entailment") return NLILabel::ENTAILMENT;
    if (name == "contradiction") return NLILabel::CONTRADICTION;
    if (name == "neutral") return NLILabel::NEUTRAL;
    throw DataError("unrecognized NLI label: " + name);
}

NLILabelSequence rationale_to_nli(const corpus::RationaleMask& mask,
                                  corpus::TaskLabel label) {
    if (mask.size() == 0) throw DataError("rationale_to_nli: empty mask");
    NLILabelSequence out;
    out.reserve(mask.size());
    for (auto bit : mask.bits) {
        if (bit && label == corpus::TaskLabel::POSITIVE) {
            out.push_back(NLILabel::ENTAILMENT);
        } else if (bit && label == corpus::TaskLabel::NEGATIVE) {
            out.push_back(NLILabel::CONTRADICTION);
        } else {
            out.push_back(NLILabel::NEUTRAL);
        }
    }
    return out;
}

corpus::RationaleMask nli_to_rationale(const NLILabelSequence& labels,
                                       corpus::TaskLabel label) {
    if (labels.empty()) throw DataError("nli_to_rationale: empty label sequence");
    corpus::RationaleMask out;
    out.bits.reserve(labels.size());
    for (NLILabel l : labels) {
        bool selected = (l == NLILabel::ENTAILMENT && label == corpus::TaskLabel::POSITIVE) ||
                        (l == NLILabel::CONTRADICTION && label == corpus::TaskLabel::NEGATIVE);
        out.bits.push_back(selected ? 1 : 0);
    }
    return out;
}

} // namespace etp::labelxform
