#include "impactbench/explain/explainer.hpp"

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench::explain {

int resolve_target(const Image& x, const model::Classifier& model, const ExplainContext& ctx) {
  if (ctx.target_class) {
    if (*ctx.target_class < 0 || *ctx.target_class >= model.num_classes()) {
      throw RangeError(fmt::format("target class {} outside [0,{})", *ctx.target_class, model.num_classes()));
    }
    return *ctx.target_class;
  }
  return model.classify(x).label();
}

}  // namespace impactbench::explain
