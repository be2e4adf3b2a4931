#pragma once

#include "f0dbn/dbn.hpp"
#include "f0dbn/dnn.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace f0dbn {

class ModelFormatError : public std::runtime_error {
public:
    enum class Kind { BadMagic, UnsupportedVersion, Corrupted, InconsistentShape };

    ModelFormatError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

enum class ModelKind : std::uint32_t { Dbn = 1, Dnn = 2 };

/// Self-describing model container. Byte layout (little-endian) is
/// documented in docs/model_format.md.
struct ModelFile {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::variant<DbnModel, DnnModel> model;
    std::uint64_t seed = 0;
    /// Training configuration echo, written in the given order.
    std::vector<std::pair<std::string, std::string>> metadata;

    ModelKind kind() const noexcept
    {
        return std::holds_alternative<DbnModel>(model) ? ModelKind::Dbn : ModelKind::Dnn;
    }

    friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

std::string serialize_model(const ModelFile& file);

/// Throws ModelFormatError.
ModelFile deserialize_model(std::string_view bytes);

/// Atomic write (temporary file + rename).
void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

} // namespace f0dbn
