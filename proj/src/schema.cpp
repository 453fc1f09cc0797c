#include "cdtd/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cdtd {

int TableSchema::n_continuous() const {
    int n = 0;
    for (const auto& f : features) n += (f.kind == FeatureKind::Continuous);
    return n;
}

int TableSchema::n_categorical() const {
    int n = 0;
    for (const auto& f : features) n += (f.kind == FeatureKind::Categorical);
    return n;
}

void TableSchema::validate() const {
    if (features.empty()) throw std::invalid_argument("schema: needs at least one feature");
    std::set<std::string> names;
    for (const auto& f : features) {
        if (f.name.empty()) throw std::invalid_argument("schema: empty feature name");
        if (!names.insert(f.name).second)
            throw std::invalid_argument("schema: duplicate feature name '" + f.name + "'");
    }
    if (target_index && (*target_index < 0 || *target_index >= n_features()))
        throw std::invalid_argument("schema: target index out of range");
}

std::string TableSchema::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["features"] = nlohmann::json::array();
    for (const auto& f : features) {
        nlohmann::json jf;
        jf["name"] = f.name;
        jf["kind"] = f.kind == FeatureKind::Continuous ? "continuous" : "categorical";
        if (f.is_integer) jf["integer"] = true;
        j["features"].push_back(jf);
    }
    if (target_index) j["target"] = features[*target_index].name;
    return j.dump(2);
}

TableSchema TableSchema::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("schema: invalid JSON: ") + e.what());
    }
    TableSchema s;
    s.name = j.value("name", "");
    if (!j.contains("features") || !j["features"].is_array())
        throw std::invalid_argument("schema: missing 'features' array");
    for (const auto& jf : j["features"]) {
        FeatureSpec f;
        f.name = jf.at("name").get<std::string>();
        std::string kind = jf.at("kind").get<std::string>();
        if (kind == "continuous")
            f.kind = FeatureKind::Continuous;
        else if (kind == "categorical")
            f.kind = FeatureKind::Categorical;
        else
            throw std::invalid_argument("schema: unknown kind '" + kind + "'");
        f.is_integer = jf.value("integer", false);
        if (f.is_integer && f.kind != FeatureKind::Continuous)
            throw std::invalid_argument("schema: 'integer' only applies to continuous features");
        s.features.push_back(f);
    }
    if (j.contains("target")) {
        std::string t = j["target"].get<std::string>();
        for (int k = 0; k < s.n_features(); ++k)
            if (s.features[k].name == t) s.target_index = k;
        if (!s.target_index)
            throw std::invalid_argument("schema: target '" + t + "' is not a feature");
    }
    s.validate();
    return s;
}

TableSchema TableSchema::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("schema not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace cdtd
