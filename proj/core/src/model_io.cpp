#include "f0dbn/model_io.hpp"

#include "f0dbn/corpus.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>

namespace f0dbn {

namespace {

constexpr std::array<char, 8> kMagic = {'F', '0', 'D', 'B', 'N', 'M', 'D', 'L'};

// Guards allocation from corrupted length fields.
constexpr std::uint64_t kMaxDimension = 1U << 20;
constexpr std::uint32_t kMaxStringLength = 1U << 20;

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }

    void u32(std::uint32_t v)
    {
        for (int k = 0; k < 4; ++k) {
            out_.push_back(static_cast<char>((v >> (8 * k)) & 0xffU));
        }
    }

    void u64(std::uint64_t v)
    {
        for (int k = 0; k < 8; ++k) {
            out_.push_back(static_cast<char>((v >> (8 * k)) & 0xffU));
        }
    }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void reals(std::span<const double> xs)
    {
        for (double x : xs) {
            f64(x);
        }
    }

    void str(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        out_ += s;
    }

    void bytes(std::string_view b) { out_ += b; }

    std::string& buffer() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

    std::uint32_t u32()
    {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[k])) << (8 * k);
        }
        return v;
    }

    std::uint64_t u64()
    {
        const auto b = take(8);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[k])) << (8 * k);
        }
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::vector<double> reals(std::size_t n)
    {
        if (n > remaining() / 8) {
            truncated();
        }
        std::vector<double> xs(n);
        for (auto& x : xs) {
            x = f64();
        }
        return xs;
    }

    std::string str()
    {
        const std::uint32_t n = u32();
        if (n > kMaxStringLength) {
            throw ModelFormatError(ModelFormatError::Kind::Corrupted, "model file: string length out of range");
        }
        return std::string(take(n));
    }

    std::uint64_t dimension()
    {
        const std::uint64_t d = u64();
        if (d == 0 || d > kMaxDimension) {
            throw ModelFormatError(ModelFormatError::Kind::InconsistentShape,
                                   "model file: layer dimension " + std::to_string(d) + " out of range");
        }
        return d;
    }

    std::string_view take(std::size_t n)
    {
        if (n > remaining()) {
            truncated();
        }
        const auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const noexcept { return in_.size() - pos_; }

private:
    [[noreturn]] static void truncated()
    {
        throw ModelFormatError(ModelFormatError::Kind::Corrupted, "model file: unexpected end of data");
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

void write_dense(Writer& w, const DenseLayer& l)
{
    w.u64(l.fan_in());
    w.u64(l.fan_out());
    w.reals(l.weights.data());
    w.reals(l.bias);
}

DenseLayer read_dense(Reader& r)
{
    const std::uint64_t in = r.dimension();
    const std::uint64_t out = r.dimension();
    DenseLayer l;
    l.weights = Matrix(in, out, r.reals(in * out));
    l.bias = r.reals(out);
    return l;
}

} // namespace

std::string serialize_model(const ModelFile& file)
{
    Writer w;
    w.bytes(std::string_view(kMagic.data(), kMagic.size()));
    w.u32(ModelFile::kFormatVersion);
    w.u32(static_cast<std::uint32_t>(file.kind()));
    w.u64(file.seed);
    w.u32(static_cast<std::uint32_t>(file.metadata.size()));
    for (const auto& [k, v] : file.metadata) {
        w.str(k);
        w.str(v);
    }
    if (const auto* dbn = std::get_if<DbnModel>(&file.model)) {
        w.u32(static_cast<std::uint32_t>(dbn->num_layers()));
        for (const auto& l : dbn->layers()) {
            w.u64(l.visible_dim());
            w.u64(l.hidden_dim());
            w.reals(l.weights.data());
            w.reals(l.visible_bias);
            w.reals(l.hidden_bias);
        }
    } else {
        const auto& dnn = std::get<DnnModel>(file.model);
        dnn.validate();
        w.u32(static_cast<std::uint32_t>(dnn.hidden.size()));
        for (const auto& l : dnn.hidden) {
            write_dense(w, l);
        }
        write_dense(w, dnn.output);
        w.u8(dnn.normalization ? 1 : 0);
        w.f64(dnn.normalization ? dnn.normalization->mean : 0.0);
        w.f64(dnn.normalization ? dnn.normalization->stddev : 0.0);
    }
    w.u32(checksum(w.buffer()));
    return std::move(w.buffer());
}

ModelFile deserialize_model(std::string_view bytes)
{
    using Kind = ModelFormatError::Kind;
    if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw ModelFormatError(Kind::BadMagic, "model file: bad magic (not a model file)");
    }
    if (bytes.size() < kMagic.size() + 8) {
        throw ModelFormatError(Kind::Corrupted, "model file: truncated header");
    }
    Reader header(bytes.substr(kMagic.size()));
    const std::uint32_t version = header.u32();
    if (version != ModelFile::kFormatVersion) {
        throw ModelFormatError(Kind::UnsupportedVersion,
                               "model file: unsupported format version " + std::to_string(version));
    }
    if (bytes.size() < kMagic.size() + 12) {
        throw ModelFormatError(Kind::Corrupted, "model file: truncated");
    }
    const std::string_view body = bytes.substr(0, bytes.size() - 4);
    Reader tail(bytes.substr(bytes.size() - 4));
    if (tail.u32() != checksum(body)) {
        throw ModelFormatError(Kind::Corrupted, "model file: checksum mismatch (file corrupted or truncated)");
    }

    Reader r(body.substr(kMagic.size() + 4));
    ModelFile file;
    const std::uint32_t kind = r.u32();
    file.seed = r.u64();
    const std::uint32_t n_meta = r.u32();
    for (std::uint32_t k = 0; k < n_meta; ++k) {
        std::string key = r.str();
        std::string value = r.str();
        file.metadata.emplace_back(std::move(key), std::move(value));
    }
    try {
        if (kind == static_cast<std::uint32_t>(ModelKind::Dbn)) {
            const std::uint32_t n_layers = r.u32();
            std::vector<RbmParams> layers;
            for (std::uint32_t k = 0; k < n_layers; ++k) {
                const std::uint64_t v = r.dimension();
                const std::uint64_t h = r.dimension();
                Matrix w(v, h, r.reals(v * h));
                Vector vb = r.reals(v);
                Vector hb = r.reals(h);
                layers.emplace_back(std::move(w), std::move(vb), std::move(hb));
            }
            file.model = DbnModel(std::move(layers));
        } else if (kind == static_cast<std::uint32_t>(ModelKind::Dnn)) {
            DnnModel dnn;
            const std::uint32_t n_hidden = r.u32();
            for (std::uint32_t k = 0; k < n_hidden; ++k) {
                dnn.hidden.push_back(read_dense(r));
            }
            dnn.output = read_dense(r);
            const bool has_norm = r.u8() != 0;
            const double mean = r.f64();
            const double sd = r.f64();
            if (has_norm) {
                dnn.normalization = TargetNormalization{mean, sd};
            }
            dnn.validate();
            file.model = std::move(dnn);
        } else {
            throw ModelFormatError(Kind::Corrupted, "model file: unknown model kind " + std::to_string(kind));
        }
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(Kind::InconsistentShape, std::string("model file: ") + e.what());
    }
    if (r.remaining() != 0) {
        throw ModelFormatError(Kind::Corrupted, "model file: trailing bytes after payload");
    }
    return file;
}

void save_model(const ModelFile& file, const std::filesystem::path& path)
{
    write_file_atomic(path, serialize_model(file));
}

ModelFile load_model(const std::filesystem::path& path)
{
    return deserialize_model(read_text_file(path));
}

} // namespace f0dbn
