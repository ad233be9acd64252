#pragma once

#include "gridloop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <initializer_list>
#include <string>

namespace gridloop::jsonutil {

using nlohmann::json;

/// Unknown keys are rejected so a typo cannot silently fall back to a
/// default.
inline void require_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
    if (!obj.is_object()) throw ParseError(where + " must be an object");
    for (const char* k : required) {
        if (!obj.contains(k))
            throw ParseError("missing key '" + std::string(k) + "' in " + where);
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& k = it.key();
        const bool known =
            std::any_of(required.begin(), required.end(), [&](const char* r) { return k == r; }) ||
            std::any_of(optional.begin(), optional.end(), [&](const char* o) { return k == o; });
        if (!known) throw ParseError("unknown key '" + k + "' in " + where);
    }
}

inline double get_num(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number()) throw ParseError("'" + std::string(key) + "' in " + where + " must be a number");
    return v.get<double>();
}

inline int get_int(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ParseError("'" + std::string(key) + "' in " + where + " must be an integer");
    return v.get<int>();
}

} // namespace gridloop::jsonutil
