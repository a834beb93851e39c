#include <doctest.h>

#include "etp/errors.hpp"
#include "etp/labelxform.hpp"

using namespace etp;
using corpus::RationaleMask;
using corpus::TaskLabel;
using labelxform::NLILabel;

namespace {

RationaleMask mask_of(std::initializer_list<int> bits) {
    RationaleMask m;
    for (int b : bits) m.bits.push_back(b ? 1 : 0);
    return m;
}

} // namespace

TEST_CASE("forward transformation case table") {
    auto seq = labelxform::rationale_to_nli(mask_of({1, 0}), TaskLabel::POSITIVE);
    REQUIRE(seq.size() == 2);
    CHECK(seq[0] == NLILabel::ENTAILMENT);
    CHECK(seq[1] == NLILabel::NEUTRAL);

    seq = labelxform::rationale_to_nli(mask_of({1}), TaskLabel::NEGATIVE);
    CHECK(seq[0] == NLILabel::CONTRADICTION);

    seq = labelxform::rationale_to_nli(mask_of({0, 0, 0}), TaskLabel::POSITIVE);
    for (auto l : seq) CHECK(l == NLILabel::NEUTRAL);
}

TEST_CASE("reverse transformation case table") {
    auto m = labelxform::nli_to_rationale({NLILabel::ENTAILMENT, NLILabel::NEUTRAL},
                                          TaskLabel::POSITIVE);
    CHECK(m == mask_of({1, 0}));

    m = labelxform::nli_to_rationale({NLILabel::CONTRADICTION}, TaskLabel::POSITIVE);
    CHECK(m == mask_of({0}));

    m = labelxform::nli_to_rationale(
        {NLILabel::CONTRADICTION, NLILabel::NEUTRAL, NLILabel::CONTRADICTION},
        TaskLabel::NEGATIVE);
    CHECK(m == mask_of({1, 0, 1}));
}

TEST_CASE("neutral always maps to non-rationale") {
    for (TaskLabel label : {TaskLabel::POSITIVE, TaskLabel::NEGATIVE}) {
        auto m = labelxform::nli_to_rationale(
            {NLILabel::NEUTRAL, NLILabel::NEUTRAL}, label);
        CHECK(m.popcount() == 0);
    }
}

TEST_CASE("empty inputs are rejected") {
    CHECK_THROWS_AS(labelxform::rationale_to_nli(RationaleMask{}, TaskLabel::POSITIVE),
                    DataError);
    CHECK_THROWS_AS(labelxform::nli_to_rationale({}, TaskLabel::POSITIVE), DataError);
}

TEST_CASE("round trip is exact for all masks up to N=10") {
    for (int n = 1; n <= 10; ++n) {
        for (unsigned bits = 0; bits < (1u << n); ++bits) {
            RationaleMask mask;
            for (int i = 0; i < n; ++i) mask.bits.push_back((bits >> i) & 1u);
            for (TaskLabel label : {TaskLabel::POSITIVE, TaskLabel::NEGATIVE}) {
                auto seq = labelxform::rationale_to_nli(mask, label);
                REQUIRE(static_cast<int>(seq.size()) == n);
                CHECK(labelxform::nli_to_rationale(seq, label) == mask);
            }
        }
    }
}

TEST_CASE("forward transform never emits a label contradicting the task label") {
    for (int n = 1; n <= 6; ++n) {
        for (unsigned bits = 0; bits < (1u << n); ++bits) {
            RationaleMask mask;
            for (int i = 0; i < n; ++i) mask.bits.push_back((bits >> i) & 1u);
            auto pos = labelxform::rationale_to_nli(mask, TaskLabel::POSITIVE);
            auto neg = labelxform::rationale_to_nli(mask, TaskLabel::NEGATIVE);
            for (auto l : pos) CHECK(l != NLILabel::CONTRADICTION);
            for (auto l : neg) CHECK(l != NLILabel::ENTAILMENT);
        }
    }
}

TEST_CASE("cross-label collapse: mismatched evidence is rejected everywhere") {
    for (int n = 1; n <= 8; ++n) {
        for (unsigned bits = 0; bits < (1u << n); ++bits) {
            RationaleMask mask;
            for (int i = 0; i < n; ++i) mask.bits.push_back((bits >> i) & 1u);
            auto seq = labelxform::rationale_to_nli(mask, TaskLabel::POSITIVE);
            CHECK(labelxform::nli_to_rationale(seq, TaskLabel::NEGATIVE).popcount() == 0);
            seq = labelxform::rationale_to_nli(mask, TaskLabel::NEGATIVE);
            CHECK(labelxform::nli_to_rationale(seq, TaskLabel::POSITIVE).popcount() == 0);
        }
    }
}

TEST_CASE("both transforms are element-wise (permutation equivariant)") {
    RationaleMask mask = mask_of({1, 0, 1, 1, 0});
    auto seq = labelxform::rationale_to_nli(mask, TaskLabel::POSITIVE);
    // Reverse the mask, transform, and compare with the reversed sequence.
    RationaleMask rev = mask;
    std::reverse(rev.bits.begin(), rev.bits.end());
    auto rev_seq = labelxform::rationale_to_nli(rev, TaskLabel::POSITIVE);
    std::reverse(rev_seq.begin(), rev_seq.end());
    CHECK(seq == rev_seq);
}
