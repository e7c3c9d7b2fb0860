#include "mscr/config.hpp"

#include "mscr/manifest.hpp"

#include <fstream>
#include <sstream>

namespace mscr::config {

namespace {

// Leaf types: "number", "integer", "string", "bool", "numbers" (array of numbers).
// Objects nest.
const Json& schema() {
    static const Json s = Json::parse(R"({
        "description": "string",
        "out": "string",
        "seed": "integer",
        "robot": {"preset": "string", "L": "number", "r": "number", "E": "number", "M": "number"},
        "magnet": {"moment": "number", "height": "number", "phi": "number", "psi": "number",
                   "position": "numbers"},
        "solver": {"intervals": "integer", "tolerance": "number", "max_iterations": "integer"},
        "sweep": {"psi_points": "integer", "psi_lo": "number", "psi": "numbers", "heights": "numbers"},
        "calibrate": {"samples": "string", "range": "numbers", "count": "integer", "noise": "number"},
        "fieldmap": {"axis": "string", "from": "number", "to": "number", "points": "integer",
                     "psi": "number"},
        "jacobian": {"psi_points": "integer", "heights": "numbers", "delta": "number"},
        "controller": {"variant": "string", "gain": "number", "lambda": "number",
                       "psi_min": "number", "psi_max": "number", "rate_limit": "number",
                       "damping": "string", "mode": "string", "table_points": "integer",
                       "leso": {"beta1": "number", "beta2": "number", "epsilon": "number"},
                       "td": {"speed": "number", "k1": "number", "k2": "number"}},
        "reference": {"kind": "string", "amplitude": "number", "period": "number", "phase": "number",
                      "offset": "number", "start": "number", "unreachable": "bool"},
        "disturbance": {"kind": "string", "magnitude": "number", "start": "number",
                        "bandwidth": "number", "measurement_noise": "number"},
        "sim": {"dt": "number", "duration": "number", "sensor": "string"},
        "vision": {"frames": "string", "synthetic_frames": "integer", "threshold": "number",
                   "alpha_step": "number", "tip_window": "number", "pitch": "number",
                   "stroke": "integer", "width": "integer", "height": "integer"},
        "path": {"file": "string", "generate": "string", "samples": "integer", "fill": "number",
                 "span": "number", "k_x": "number", "dt": "number", "advance_threshold": "number",
                 "advance_window": "integer", "advance_tolerance": "number",
                 "base_rate_limit": "number", "psi_rate_limit": "number", "nu_min": "number",
                 "nu_max": "number", "step_budget": "integer"}
    })");
    return s;
}

bool type_ok(const Json& v, const std::string& type) {
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer();
    if (type == "string") return v.is_string();
    if (type == "bool") return v.is_boolean();
    if (type == "numbers") {
        if (!v.is_array()) return false;
        for (const auto& e : v)
            if (!e.is_number()) return false;
        return true;
    }
    return false;
}

void check(const Json& doc, const Json& sch, const std::string& prefix) {
    if (!doc.is_object()) throw ConfigError((prefix.empty() ? "document" : prefix) + " must be an object");
    for (const auto& [key, value] : doc.items()) {
        std::string name = prefix.empty() ? key : prefix + "." + key;
        if (!sch.contains(key)) throw ConfigError("unknown key '" + name + "'");
        const Json& rule = sch.at(key);
        if (rule.is_object()) {
            check(value, rule, name);
        } else if (!type_ok(value, rule.get<std::string>())) {
            throw ConfigError("key '" + name + "' must be of type " + rule.get<std::string>());
        }
    }
}

void describe(const Json& sch, const std::string& prefix, std::ostringstream& out) {
    for (const auto& [key, rule] : sch.items()) {
        std::string name = prefix.empty() ? key : prefix + "." + key;
        if (rule.is_object())
            describe(rule, name, out);
        else
            out << "  " << name << " (" << rule.get<std::string>() << ")\n";
    }
}

}  // namespace

void validate(const Json& doc) { check(doc, schema(), ""); }

std::string schema_summary() {
    std::ostringstream out;
    describe(schema(), "", out);
    return out.str();
}

void apply_override(Json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error&) {
        value = text;
    }
    Json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        auto dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a value");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        pos = dot + 1;
    }
}

Scenario load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
    Scenario sc;
    if (file) {
        std::ifstream in(*file, std::ios::binary);
        if (!in) throw ConfigError("cannot read config " + file->string());
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            sc.doc = Json::parse(bytes);
        } catch (const Json::parse_error& e) {
            throw ConfigError(file->string() + ": " + e.what());
        }
        sc.source = *file;
        sc.base_dir = file->parent_path().empty() ? std::filesystem::path(".") : file->parent_path();
        sc.input_sha256 = manifest::sha256_hex(bytes);
    }
    if (sc.doc.is_null()) sc.doc = Json::object();
    for (const auto& o : overrides) apply_override(sc.doc, o);
    sc.overrides = overrides;
    validate(sc.doc);
    return sc;
}

const Json& Scenario::section(const std::string& name) const {
    static const Json empty = Json::object();
    auto it = doc.find(name);
    return it == doc.end() ? empty : *it;
}

std::filesystem::path Scenario::resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

std::string Scenario::effective_sha256() const { return manifest::sha256_hex(doc.dump()); }

double number(const Json& s, const char* key, double fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : it->get<double>();
}

int integer(const Json& s, const char* key, int fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : it->get<int>();
}

bool boolean(const Json& s, const char* key, bool fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : it->get<bool>();
}

std::string string(const Json& s, const char* key, const std::string& fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : it->get<std::string>();
}

std::vector<double> numbers(const Json& s, const char* key, std::vector<double> fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : it->get<std::vector<double>>();
}

}  // namespace mscr::config
