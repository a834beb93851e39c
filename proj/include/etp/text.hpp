#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace etp::text {

// Splits on whitespace, then peels leading/trailing punctuation runs into
// their own tokens ("banjo." -> "banjo", "."). Interior punctuation such as
// hyphens or apostrophes stays attached.
std::vector<std::string> tokenize_words(const std::string& s);

std::string to_lower(std::string s);

std::string trim(const std::string& s);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

bool is_punct_token(const std::string& tok);

// FNV-1a, used for stable cross-platform vocabulary hashing and fingerprints.
std::uint64_t fnv1a64(const std::string& s);

} // namespace etp::text
