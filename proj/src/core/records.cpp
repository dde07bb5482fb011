#include "impactbench/core/records.hpp"

#include <cmath>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench {

namespace {

void check_unit(double value, const char* name, const std::string& id) {
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
    throw RangeError(fmt::format("record '{}': {} = {} is outside [0,1]", id, name, value));
  }
}

}  // namespace

void validate_record(const EvalRecord& record) {
  check_unit(record.z, "z", record.image_id);
  check_unit(record.z_prime, "z'", record.image_id);
  if (record.z_prime_argmax) check_unit(*record.z_prime_argmax, "z' (argmax)", record.image_id);
  if (record.coverage) {
    const auto& pair = *record.coverage;
    if (pair.impacted.height() != pair.critical.height() || pair.impacted.width() != pair.critical.width()) {
      throw ShapeError(fmt::format("record '{}': coverage masks differ in shape", record.image_id));
    }
  }
}

}  // namespace impactbench
