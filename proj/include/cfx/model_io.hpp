#pragma once

#include "cfx/ensemble.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfx {

/// Schema or semantic violation in a model/query document. `path()` is a
/// JSON-pointer-like location such as "/classifier/trees/3/nodes/7/left".
class DocumentError : public std::runtime_error {
public:
    DocumentError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

inline constexpr int kSchemaVersion = 1;

Model parse_model(std::string_view text);
Model load_model(const std::string& file);

/// Canonical serialization; parse_model(serialize_model(m)) reproduces m and
/// serialize(parse(serialize(m))) is byte-identical to serialize(m).
std::string serialize_model(const Model& m);

/// Structural validation shared by the parser and programmatically built
/// models (synthetic fixtures). Throws DocumentError.
void validate_model(Model& m);

}  // namespace cfx
