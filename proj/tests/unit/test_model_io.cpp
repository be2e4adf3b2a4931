#include "generators.hpp"

#include "f0dbn/corpus.hpp"
#include "f0dbn/model_io.hpp"

#include <doctest.h>

#include <bit>
#include <cstring>

using namespace f0dbn;
using namespace f0dbn::testing;

namespace {

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320).
std::uint32_t reference_crc32(std::string_view bytes)
{
    std::uint32_t crc = 0xffffffffU;
    for (unsigned char c : bytes) {
        crc ^= c;
        for (int k = 0; k < 8; ++k) {
            crc = (crc >> 1) ^ (0xedb88320U & (0U - (crc & 1U)));
        }
    }
    return ~crc;
}

// Little-endian encoder written against the documented layout.
struct Bytes {
    std::string s;
    void u8(unsigned v) { s.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v)
    {
        for (int k = 0; k < 4; ++k) {
            s.push_back(static_cast<char>(v >> (8 * k)));
        }
    }
    void u64(std::uint64_t v)
    {
        for (int k = 0; k < 8; ++k) {
            s.push_back(static_cast<char>(v >> (8 * k)));
        }
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& t)
    {
        u32(static_cast<std::uint32_t>(t.size()));
        s += t;
    }
    void header(std::uint32_t kind, std::uint64_t seed)
    {
        s += "F0DBNMDL";
        u32(1);
        u32(kind);
        u64(seed);
    }
    void dense(std::size_t in, std::size_t out, double start)
    {
        u64(in);
        u64(out);
        for (std::size_t k = 0; k < in * out + out; ++k) {
            f64(start + static_cast<double>(k));
        }
    }
    std::string sealed() const
    {
        Bytes b{s};
        b.u32(reference_crc32(s));
        return b.s;
    }
};

DenseLayer counting_layer(std::size_t in, std::size_t out, double start)
{
    std::vector<double> w(in * out);
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = start + static_cast<double>(k);
    }
    Vector b(out);
    for (std::size_t k = 0; k < out; ++k) {
        b[k] = start + static_cast<double>(w.size() + k);
    }
    return DenseLayer{Matrix(in, out, w), b};
}

ModelFile sample_dnn()
{
    DnnModel m = init_random(std::vector<std::size_t>{220, 12, 9}, 5, 31);
    m.normalization = TargetNormalization{4.8, 0.21};
    return ModelFile{m, 31, {{"tool", "test"}, {"epochs", "3"}}};
}

ModelFile sample_dbn()
{
    Rng rng(2);
    return ModelFile{DbnModel({random_rbm(7, 5, rng), random_rbm(5, 3, rng)}), 99, {{"layer_sizes", "7,5,3"}}};
}

ModelFormatError::Kind error_kind(std::string_view bytes)
{
    try {
        deserialize_model(bytes);
    } catch (const ModelFormatError& e) {
        return e.kind();
    }
    FAIL("expected ModelFormatError");
    return ModelFormatError::Kind::Corrupted;
}

} // namespace

TEST_CASE("hand-encoded DNN file decodes to the expected model")
{
    Bytes b;
    b.header(2, 77);
    b.u32(1);
    b.str("k");
    b.str("v");
    b.u32(1);
    b.dense(3, 4, 0.5);
    b.dense(4, 5, 100.0);
    b.u8(1);
    b.f64(5.0);
    b.f64(0.25);
    const ModelFile f = deserialize_model(b.sealed());
    CHECK(f.kind() == ModelKind::Dnn);
    CHECK(f.seed == 77);
    CHECK(f.metadata == std::vector<std::pair<std::string, std::string>>{{"k", "v"}});
    DnnModel expect;
    expect.hidden.push_back(counting_layer(3, 4, 0.5));
    expect.output = counting_layer(4, 5, 100.0);
    expect.normalization = TargetNormalization{5.0, 0.25};
    CHECK(std::get<DnnModel>(f.model) == expect);
    CHECK(serialize_model(f) == b.sealed());
}

TEST_CASE("hand-encoded DBN file decodes to the expected model")
{
    Bytes b;
    b.header(1, 5);
    b.u32(0);
    b.u32(1);
    b.u64(2);
    b.u64(3);
    for (double x : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, -1.0, -2.0, 0.5, 0.25, 0.125}) {
        b.f64(x);
    }
    const ModelFile f = deserialize_model(b.sealed());
    const auto& dbn = std::get<DbnModel>(f.model);
    REQUIRE(dbn.num_layers() == 1);
    CHECK(dbn.layers()[0].weights == Matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    CHECK(dbn.layers()[0].visible_bias == Vector{-1.0, -2.0});
    CHECK(dbn.layers()[0].hidden_bias == Vector{0.5, 0.25, 0.125});
    CHECK(serialize_model(f) == b.sealed());
}

TEST_CASE("round trips are lossless and canonical")
{
    for (const ModelFile& f : {sample_dnn(), sample_dbn()}) {
        const std::string bytes = serialize_model(f);
        const ModelFile back = deserialize_model(bytes);
        CHECK(back == f);
        CHECK(serialize_model(back) == bytes);

        TempDir tmp;
        save_model(f, tmp / "m.bin");
        const ModelFile loaded = load_model(tmp / "m.bin");
        CHECK(loaded == f);
        save_model(loaded, tmp / "m2.bin");
        CHECK(read_text_file(tmp / "m.bin") == read_text_file(tmp / "m2.bin"));
    }
    ModelFile no_norm = sample_dnn();
    std::get<DnnModel>(no_norm.model).normalization.reset();
    CHECK(deserialize_model(serialize_model(no_norm)) == no_norm);
}

TEST_CASE("checksum is standard CRC-32 of everything before it")
{
    const std::string bytes = serialize_model(sample_dbn());
    const std::string_view body(bytes.data(), bytes.size() - 4);
    std::uint32_t stored = 0;
    for (int k = 0; k < 4; ++k) {
        stored |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[bytes.size() - 4 + k])) << (8 * k);
    }
    CHECK(stored == reference_crc32(body));
    CHECK(reference_crc32("123456789") == 0xcbf43926U);
}

TEST_CASE("loaded DNN predicts identically on 100 random inputs")
{
    const ModelFile f = sample_dnn();
    const ModelFile g = deserialize_model(serialize_model(f));
    const auto& a = std::get<DnnModel>(f.model);
    const auto& b = std::get<DnnModel>(g.model);
    Rng rng(6);
    for (int k = 0; k < 100; ++k) {
        const Vector x = random_binary(220, rng, 0.06);
        CHECK(predict_states(a, x) == predict_states(b, x));
    }
}

TEST_CASE("corruption is detected")
{
    using Kind = ModelFormatError::Kind;
    const std::string bytes = serialize_model(sample_dnn());

    for (std::size_t cut : {std::size_t{0}, std::size_t{4}, std::size_t{8}, std::size_t{14}, bytes.size() / 2,
                            bytes.size() - 1}) {
        const Kind k = error_kind(std::string_view(bytes).substr(0, cut));
        CHECK((k == Kind::Corrupted || k == Kind::BadMagic));
        if (cut >= 12) {
            CHECK(k == Kind::Corrupted);
        }
    }

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(error_kind(bad_magic) == Kind::BadMagic);

    std::string version = bytes;
    version[8] = 2;
    CHECK(error_kind(version) == Kind::UnsupportedVersion);

    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        std::string flipped = bytes;
        const std::size_t pos = 12 + rng.below(bytes.size() - 12);
        flipped[pos] = static_cast<char>(flipped[pos] ^ (1 << rng.below(8)));
        CHECK(error_kind(flipped) == Kind::Corrupted);
    }

    CHECK(error_kind(bytes + "x") == Kind::Corrupted);
    CHECK(error_kind("") == Kind::BadMagic);
    CHECK_THROWS_AS(load_model("/nonexistent/f0dbn/model.bin"), std::runtime_error);
}

TEST_CASE("shape inconsistencies are reported as such")
{
    using Kind = ModelFormatError::Kind;
    Bytes b;
    b.header(2, 0);
    b.u32(0);
    b.u32(1);
    b.dense(3, 4, 0.0);
    b.dense(5, 5, 0.0); // expects 4 inputs
    b.u8(0);
    b.f64(0.0);
    b.f64(0.0);
    CHECK(error_kind(b.sealed()) == Kind::InconsistentShape);

    Bytes d;
    d.header(1, 0);
    d.u32(0);
    d.u32(1);
    d.u64(0);
    d.u64(3);
    CHECK(error_kind(d.sealed()) == Kind::InconsistentShape);

    Bytes e;
    e.header(9, 0);
    e.u32(0);
    CHECK(error_kind(e.sealed()) == Kind::Corrupted);
}
