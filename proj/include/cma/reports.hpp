#pragma once

// JSON report assembly for the command-line pipelines, plus a small schema
// checker (the subset of JSON Schema the shipped schema file uses: type,
// properties, required, items, enum) so emitted reports can be validated in
// tests and by consumers without extra dependencies.

#include <cstdint>
#include <string>

#include "grid.hpp"
#include "json.hpp"

namespace cma {

using json = nlohmann::json;

inline json node_coords(const GridDomain& g, std::int64_t node) {
    if (node < 0) return nullptr;
    Point p = g.position(node);
    json arr = json::array();
    for (int d = 0; d < g.dims; ++d) arr.push_back(p[d]);
    return arr;
}

inline json make_check(const std::string& name, bool pass, json worst_node = nullptr,
                       double worst_value = 0, double tolerance = 0,
                       const std::string& detail = "") {
    return json{{"name", name},        {"pass", pass},           {"worst_node", worst_node},
                {"worst_value", worst_value}, {"tolerance", tolerance}, {"detail", detail}};
}

inline json make_report(const std::string& command, const std::string& domain) {
    return json{{"command", command},       {"domain", domain}, {"passed", true},
                {"checks", json::array()},  {"constants", json::object()},
                {"outputs", json::object()}};
}

inline void add_check(json& report, json check) {
    if (!check.value("pass", false)) report["passed"] = false;
    report["checks"].push_back(std::move(check));
}

// ---------------------------------------------------------------------------
// Minimal schema validation.

namespace detail {

inline bool type_matches(const json& doc, const std::string& type) {
    if (type == "object") return doc.is_object();
    if (type == "array") return doc.is_array();
    if (type == "string") return doc.is_string();
    if (type == "number") return doc.is_number();
    if (type == "integer") return doc.is_number_integer();
    if (type == "boolean") return doc.is_boolean();
    if (type == "null") return doc.is_null();
    return false;
}

inline bool validate_impl(const json& doc, const json& schema, const std::string& path,
                          std::string& err) {
    if (schema.contains("type")) {
        const json& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(doc, t.get<std::string>());
        } else if (t.is_array()) {
            for (const auto& alt : t)
                if (type_matches(doc, alt.get<std::string>())) {
                    ok = true;
                    break;
                }
        }
        if (!ok) {
            err = path + ": type mismatch";
            return false;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& v : schema["enum"])
            if (v == doc) {
                ok = true;
                break;
            }
        if (!ok) {
            err = path + ": value not in enum";
            return false;
        }
    }
    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!doc.contains(key.get<std::string>())) {
                    err = path + ": missing required key '" + key.get<std::string>() + "'";
                    return false;
                }
        if (schema.contains("properties"))
            for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
                if (doc.contains(it.key()))
                    if (!validate_impl(doc[it.key()], it.value(), path + "/" + it.key(), err))
                        return false;
    }
    if (doc.is_array() && schema.contains("items")) {
        std::size_t k = 0;
        for (const auto& item : doc) {
            if (!validate_impl(item, schema["items"], path + "[" + std::to_string(k) + "]", err))
                return false;
            ++k;
        }
    }
    return true;
}

}  // namespace detail

inline bool validate_json(const json& doc, const json& schema, std::string* error = nullptr) {
    std::string err;
    bool ok = detail::validate_impl(doc, schema, "$", err);
    if (!ok && error) *error = err;
    return ok;
}

}  // namespace cma
