#include "rbstab/types.hpp"

#include <string>

namespace rbstab {

std::string_view to_string(ProblemKind kind) {
  return kind == ProblemKind::Diffusion ? "diffusion" : "graetz";
}

std::string_view to_string(Formulation form) {
  return form == Formulation::Galerkin ? "galerkin" : "pg";
}

std::string_view to_string(StabilizationKind kind) {
  switch (kind) {
    case StabilizationKind::Naive: return "naive";
    case StabilizationKind::Supremizer: return "supremizer";
    case StabilizationKind::Aggregation: return "aggregation";
  }
  return "?";
}

ProblemKind parse_problem(std::string_view text) {
  if (text == "diffusion") return ProblemKind::Diffusion;
  if (text == "graetz") return ProblemKind::Graetz;
  throw ConfigError("unknown problem '" + std::string(text) + "' (expected diffusion|graetz)");
}

Formulation parse_formulation(std::string_view text) {
  if (text == "galerkin" || text == "g") return Formulation::Galerkin;
  if (text == "pg" || text == "petrov-galerkin") return Formulation::PetrovGalerkin;
  throw ConfigError("unknown formulation '" + std::string(text) + "' (expected galerkin|pg)");
}

StabilizationKind parse_stabilization(std::string_view text) {
  if (text == "naive") return StabilizationKind::Naive;
  if (text == "supremizer" || text == "sup") return StabilizationKind::Supremizer;
  if (text == "aggregation" || text == "agg") return StabilizationKind::Aggregation;
  throw ConfigError("unknown stabilization '" + std::string(text) +
                    "' (expected naive|supremizer|aggregation)");
}

}  // namespace rbstab
