#include "medcorpus/schema.hpp"

#include <cmath>
#include <regex>

namespace medcorpus {
namespace {

bool has_type(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  if (t == "number") return v.is_number();
  if (t == "integer") {
    if (v.is_number_integer()) return true;
    return v.is_number_float() && std::floor(v.get<double>()) == v.get<double>();
  }
  return false;
}

void check(const json& schema, const json& v, const std::string& ptr, std::vector<std::string>& errs) {
  auto fail = [&](const std::string& msg) { errs.push_back((ptr.empty() ? "/" : ptr) + ": " + msg); };

  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = has_type(v, t.get<std::string>());
    } else {
      for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
    }
    if (!ok) return fail("expected type " + t.dump());
  }
  if (schema.contains("const") && v != schema["const"]) fail("expected " + schema["const"].dump());
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == v;
    if (!found) fail("value " + v.dump() + " not in enum");
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (schema.contains("minimum") && x < schema["minimum"].get<double>()) fail("below minimum");
    if (schema.contains("maximum") && x > schema["maximum"].get<double>()) fail("above maximum");
  }
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (schema.contains("minLength") && s.size() < schema["minLength"].get<std::size_t>()) fail("shorter than minLength");
    if (schema.contains("pattern") && !std::regex_search(s, std::regex(schema["pattern"].get<std::string>()))) {
      fail("does not match pattern " + schema["pattern"].get<std::string>());
    }
  }
  if (v.is_object()) {
    if (schema.contains("required")) {
      for (const auto& r : schema["required"]) {
        if (!v.contains(r.get<std::string>())) fail("missing required property '" + r.get<std::string>() + "'");
      }
    }
    const json props = schema.value("properties", json::object());
    for (const auto& [k, sub] : v.items()) {
      if (props.contains(k)) {
        check(props[k], sub, ptr + "/" + k, errs);
      } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
        fail("unexpected property '" + k + "'");
      }
    }
  }
  if (v.is_array()) {
    if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) fail("fewer than minItems");
    if (schema.contains("maxItems") && v.size() > schema["maxItems"].get<std::size_t>()) fail("more than maxItems");
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) check(schema["items"], v[i], ptr + "/" + std::to_string(i), errs);
    }
  }
}

}  // namespace

std::vector<std::string> schema_errors(const json& schema, const json& instance) {
  std::vector<std::string> errs;
  check(schema, instance, "", errs);
  return errs;
}

}  // namespace medcorpus
