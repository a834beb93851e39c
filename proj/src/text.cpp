#include "etp/text.hpp"

#include <algorithm>
#include <cctype>

namespace etp::text {

namespace {

bool is_word_char(unsigned char c) {
    return std::isalnum(c) != 0 || c == '\'' || c == '-' || c == '_' ||
           c >= 0x80; // keep non-ASCII bytes inside word tokens
}

} // namespace

std::vector<std::string> tokenize_words(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        if (is_word_char(c)) {
            while (j < s.size() && is_word_char(static_cast<unsigned char>(s[j]))) ++j;
        } else {
            while (j < s.size() &&
                   !is_word_char(static_cast<unsigned char>(s[j])) &&
                   !std::isspace(static_cast<unsigned char>(s[j]))) {
                ++j;
            }
        }
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

bool is_punct_token(const std::string& tok) {
    if (tok.empty()) return false;
    for (unsigned char c : tok) {
        if (is_word_char(c)) return false;
    }
    return true;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace etp::text
