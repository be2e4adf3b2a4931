#include "generators.hpp"

#include "f0dbn/features.hpp"

#include <doctest.h>

#include <numeric>
#include <set>

using namespace f0dbn;
using namespace f0dbn::testing;

namespace {

const PhonemeInventory& inv() { return PhonemeInventory::default_inventory(); }

UtteranceAnnotation make(std::vector<std::vector<std::vector<std::string>>> words)
{
    UtteranceAnnotation a;
    for (auto& w : words) {
        Word word;
        for (auto& s : w) {
            word.syllables.push_back(Syllable{s});
        }
        a.words.push_back(word);
    }
    return a;
}

double bits(const Vector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Reference encoder built from explicit flat tables of every phoneme's context.
Vector reference_encode(const UtteranceAnnotation& a, std::size_t index, const PhonemeInventory& inventory)
{
    struct Ctx {
        std::string sym;
        std::size_t word_syls, syl_in_word, pos, syl_len, global_syl;
        const Syllable* syl;
    };
    std::vector<Ctx> flat;
    std::vector<std::size_t> syl_lengths;
    for (const auto& w : a.words) {
        for (std::size_t s = 0; s < w.syllables.size(); ++s) {
            for (std::size_t p = 0; p < w.syllables[s].phonemes.size(); ++p) {
                flat.push_back({w.syllables[s].phonemes[p], w.syllables.size(), s, p, w.syllables[s].phonemes.size(),
                                syl_lengths.size(), &w.syllables[s]});
            }
            syl_lengths.push_back(w.syllables[s].phonemes.size());
        }
    }
    Vector v(220, 0.0);
    const Ctx& c = flat[index];
    if (index > 0) {
        v[inventory.index_of(flat[index - 1].sym)] = 1;
    }
    v[46 + inventory.index_of(c.sym)] = 1;
    if (index + 1 < flat.size()) {
        v[92 + inventory.index_of(flat[index + 1].sym)] = 1;
    }
    v[138 + c.word_syls - 1] = 1;
    v[148 + c.pos] = 1;
    v[154 + c.syl_len - 1 - c.pos] = 1;
    v[160 + c.syl_in_word] = 1;
    v[170 + c.word_syls - 1 - c.syl_in_word] = 1;
    if (c.global_syl > 0) {
        v[180 + syl_lengths[c.global_syl - 1] - 1] = 1;
    }
    v[186 + c.syl_len - 1] = 1;
    if (c.global_syl + 1 < syl_lengths.size()) {
        v[192 + syl_lengths[c.global_syl + 1] - 1] = 1;
    }
    const auto& ph = c.syl->phonemes;
    for (std::size_t p = 0; p < ph.size(); ++p) {
        const auto& vowels = inventory.vowels();
        const auto it = std::find(vowels.begin(), vowels.end(), ph[p]);
        if (it != vowels.end()) {
            v[198 + p] = 1;
            v[204 + static_cast<std::size_t>(it - vowels.begin())] = 1;
            break;
        }
    }
    return v;
}

} // namespace

TEST_CASE("layout constants")
{
    CHECK(kFeatureDim == 220);
    CHECK(kFeatureGroupWidths == std::array<std::size_t, 7>{138, 10, 12, 20, 18, 6, 16});
    CHECK(feature_group_offset(0) == 0);
    CHECK(feature_group_offset(1) == 138);
    CHECK(feature_group_offset(6) == 204);
    CHECK(inv().consonants().size() == 30);
    CHECK(inv().vowels().size() == 16);
}

TEST_CASE("one_of_n")
{
    const Vector v = one_of_n(3, 10);
    CHECK(v.size() == 10);
    CHECK(v[3] == 1.0);
    CHECK(bits(v) == 1.0);
    CHECK(bits(one_of_n(kAbsent, 7)) == 0.0);
    CHECK_THROWS_AS(one_of_n(10, 10), std::invalid_argument);
    for (std::size_t n = 1; n < 12; ++n) {
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(bits(one_of_n(k, n)) == 1.0);
        }
    }
}

TEST_CASE("hand-built utterance: edges, 13-bit context, vowel-less syllable")
{
    // word 0: [k a] [t i n]   word 1: [s] [m o]
    const auto a = make({{{"k", "a"}, {"t", "i", "n"}}, {{"s"}, {"m", "o"}}});
    const auto f = encode_utterance(a, inv());
    REQUIRE(f.size() == 8);

    // Utterance-initial phoneme: previous identity and previous-syllable groups empty.
    CHECK(bits(Vector(f[0].begin(), f[0].begin() + 46)) == 0.0);
    CHECK_FALSE(decode_block(f[0], 4, 0).has_value());

    // "i" in [t i n]: every group defined.
    const Vector& mid = f[3];
    CHECK(bits(mid) == 13.0);
    CHECK(decode_block(mid, 0, 0) == inv().index_of("t"));
    CHECK(decode_block(mid, 0, 1) == inv().index_of("i"));
    CHECK(decode_block(mid, 0, 2) == inv().index_of("n"));
    CHECK(decode_block(mid, 1) == 1u);    // 2 syllables in word
    CHECK(decode_block(mid, 2, 0) == 1u); // forward position
    CHECK(decode_block(mid, 2, 1) == 1u); // backward position
    CHECK(decode_block(mid, 3, 0) == 1u);
    CHECK(decode_block(mid, 3, 1) == 0u);
    CHECK(decode_block(mid, 4, 0) == 1u); // previous syllable has 2 phonemes
    CHECK(decode_block(mid, 4, 1) == 2u);
    CHECK(decode_block(mid, 4, 2) == 0u); // next syllable (word 1) has 1 phoneme
    CHECK(decode_block(mid, 5) == 1u);
    CHECK(decode_block(mid, 6) == *inv().vowel_index("i"));

    // "n" is word-final; next phoneme "s" crosses the word boundary.
    CHECK(decode_block(f[4], 0, 2) == inv().index_of("s"));

    // Vowel-less syllable [s]: vowel groups stay zero.
    CHECK_FALSE(decode_block(f[5], 5).has_value());
    CHECK_FALSE(decode_block(f[5], 6).has_value());

    // Utterance-final phoneme.
    CHECK_FALSE(decode_block(f[7], 0, 2).has_value());
    CHECK_FALSE(decode_block(f[7], 4, 2).has_value());

    CHECK(encode(a, 3, inv()) == mid);
    CHECK_THROWS_AS(encode(a, 8, inv()), std::invalid_argument);
}

TEST_CASE("single-phoneme utterance")
{
    const auto f = encode_utterance(make({{{"a"}}}), inv());
    REQUIRE(f.size() == 1);
    CHECK(bits(f[0]) == 9.0);
}

TEST_CASE("invalid annotations are rejected")
{
    CHECK_THROWS_AS(encode_utterance(make({{{"k", "zz"}}}), inv()), std::invalid_argument);
    CHECK_THROWS_AS(encode_utterance(make({{{"k", "a", "k", "a", "k", "a", "k"}}}), inv()), std::invalid_argument);
    std::vector<std::vector<std::string>> eleven(11, std::vector<std::string>{"a"});
    CHECK_THROWS_AS(encode_utterance(make({eleven}), inv()), std::invalid_argument);
    CHECK_THROWS_AS(encode_utterance(make({{{}}}), inv()), std::invalid_argument);
    CHECK_THROWS_AS(encode_utterance(make({{}}), inv()), std::invalid_argument);
}

TEST_CASE("property: random annotations match the reference encoder")
{
    Rng rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto a = random_annotation(rng, inv(), 4, 0.1);
        const auto f = encode_utterance(a, inv());
        REQUIRE(f.size() == a.phoneme_count());
        std::vector<std::string> flat;
        for (const auto& w : a.words) {
            for (const auto& s : w.syllables) {
                flat.insert(flat.end(), s.phonemes.begin(), s.phonemes.end());
            }
        }
        for (std::size_t k = 0; k < f.size(); ++k) {
            REQUIRE(f[k].size() == 220);
            CHECK(f[k] == reference_encode(a, k, inv()));
            CHECK(inv().symbol(*decode_block(f[k], 0, 1)) == flat[k]);
            for (std::size_t g = 0; g < 7; ++g) {
                for (std::size_t b = 0; b < kFeatureGroupBlocks[g]; ++b) {
                    CHECK_NOTHROW(decode_block(f[k], g, b));
                }
            }
            const auto fwd = decode_block(f[k], 2, 0);
            const auto bwd = decode_block(f[k], 2, 1);
            const auto len = decode_block(f[k], 4, 1);
            CHECK(*fwd + *bwd == *len);
            const auto sf = decode_block(f[k], 3, 0);
            const auto sb = decode_block(f[k], 3, 1);
            CHECK(*sf + *sb == *decode_block(f[k], 1));
        }
    }
}

TEST_CASE("inventory: default, parse, serialize, errors")
{
    const auto& d = inv();
    CHECK(d.index_of("k") == 0);
    CHECK(d.index_of("a") == 30);
    CHECK(d.is_vowel("O~"));
    CHECK_FALSE(d.is_vowel("k"));
    CHECK(d.vowel_index("a") == 0u);
    CHECK_FALSE(d.vowel_index("k").has_value());
    CHECK_THROWS_AS(d.index_of("zz"), std::invalid_argument);
    CHECK_FALSE(d.contains("zz"));

    const PhonemeInventory back = PhonemeInventory::parse(d.serialize());
    CHECK(back.consonants() == d.consonants());
    CHECK(back.vowels() == d.vowels());

    CHECK_THROWS_AS(PhonemeInventory::parse("consonants a\nvowels b\n"), std::invalid_argument);
    CHECK_THROWS_AS(PhonemeInventory::parse("version 2\n" + d.serialize().substr(d.serialize().find("consonants"))),
                    std::invalid_argument);
    CHECK_THROWS_AS(PhonemeInventory::parse("version 1\nconsonants a b\nvowels c\n"), std::invalid_argument);
    CHECK_THROWS_AS(PhonemeInventory::parse("version 1\nbogus\n"), std::invalid_argument);

    std::vector<std::string> cons(d.consonants());
    cons[1] = cons[0];
    CHECK_THROWS_AS(PhonemeInventory(cons, d.vowels()), std::invalid_argument);

    std::set<std::string> all(d.consonants().begin(), d.consonants().end());
    all.insert(d.vowels().begin(), d.vowels().end());
    CHECK(all.size() == 46);
}

TEST_CASE("shipped inventory file equals the built-in default")
{
    const PhonemeInventory f = PhonemeInventory::load(F0DBN_DATA_DIR "/inventory.txt");
    CHECK(f.consonants() == inv().consonants());
    CHECK(f.vowels() == inv().vowels());
}

TEST_CASE("encoding depends on inventory order")
{
    std::vector<std::string> cons(inv().consonants());
    std::swap(cons[0], cons[1]);
    const PhonemeInventory swapped(cons, inv().vowels());
    const auto a = make({{{"k", "a"}}});
    CHECK(decode_block(encode(a, 0, swapped), 0, 1) == 1u);
    CHECK(decode_block(encode(a, 0, inv()), 0, 1) == 0u);
}
