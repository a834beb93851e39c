#pragma once

#include "etp/corpus.hpp"

#include <string>
#include <vector>

namespace etp::labelxform {

enum class NLILabel { ENTAILMENT, CONTRADICTION, NEUTRAL };

std::string nli_label_name(NLILabel l);
NLILabel parse_nli_label(const std::string& name);

using NLILabelSequence = std::vector<NLILabel>;

// Per sentence: mask=1 under POSITIVE -> ENTAILMENT, mask=1 under NEGATIVE ->
// CONTRADICTION, mask=0 -> NEUTRAL.
NLILabelSequence rationale_to_nli(const corpus::RationaleMask& mask,
                                  corpus::TaskLabel label);

// Per sentence: (ENTAILMENT under POSITIVE) or (CONTRADICTION under NEGATIVE)
// -> 1, everything else (NEUTRAL in particular) -> 0.
corpus::RationaleMask nli_to_rationale(const NLILabelSequence& labels,
                                       corpus::TaskLabel label);

} // namespace etp::labelxform
