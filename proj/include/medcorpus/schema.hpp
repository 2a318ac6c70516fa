#pragma once

#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"

namespace medcorpus {

/// Validates `instance` against the JSON Schema subset used by the shipped
/// schemas: type, enum, const, required, properties, additionalProperties
/// (boolean), items, minItems, maxItems, minimum, maximum, minLength,
/// pattern. Returns one message per violation, each prefixed with a JSON
/// pointer; empty means valid.
std::vector<std::string> schema_errors(const json& schema, const json& instance);

}  // namespace medcorpus
