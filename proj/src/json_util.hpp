#pragma once

#include "cfx/model_io.hpp"

#include <json.hpp>

#include <string>

namespace cfx::detail {

using Json = nlohmann::ordered_json;

/// Read-only view of a JSON value that remembers where it lives, so every
/// failure carries a field-level path.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const Json& json() const { return *j_; }
    bool is_object() const { return j_->is_object(); }
    bool is_null() const { return j_->is_null(); }

    bool has(const char* key) const { return j_->is_object() && j_->contains(key); }

    Reader at(const char* key) const {
        if (!j_->is_object()) fail("expected an object");
        auto it = j_->find(key);
        if (it == j_->end()) throw DocumentError(path_ + "/" + key, "missing required field");
        return Reader(*it, path_ + "/" + key);
    }

    Reader at(std::size_t index) const {
        if (!j_->is_array()) fail("expected an array");
        if (index >= j_->size()) fail("index " + std::to_string(index) + " out of range");
        return Reader((*j_)[index], path_ + "/" + std::to_string(index));
    }

    std::size_t size() const {
        if (!j_->is_array()) fail("expected an array");
        return j_->size();
    }

    template <typename T>
    T as() const {
        try {
            if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!j_->is_number_integer()) fail("expected an integer");
            }
            return j_->get<T>();
        } catch (const Json::exception& ex) {
            fail(std::string("wrong type: ") + ex.what());
        }
    }

    template <typename T>
    T get(const char* key) const {
        return at(key).template as<T>();
    }

    template <typename T>
    T get_or(const char* key, T fallback) const {
        if (!has(key) || (*j_)[key].is_null()) return fallback;
        return get<T>(key);
    }

    [[noreturn]] void fail(const std::string& msg) const { throw DocumentError(path_, msg); }

private:
    const Json* j_;
    std::string path_;
};

/// Feature value in query/explanation documents: a number, a bool for
/// binary features, or a category/level name.
double feature_value(const Reader& r, const FeatureDecl& f);

}  // namespace cfx::detail
