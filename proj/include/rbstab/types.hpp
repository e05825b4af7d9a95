#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rbstab {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VectorX<double>;
using Mat = MatrixX<double>;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class ProblemKind { Diffusion, Graetz };
enum class Formulation { Galerkin, PetrovGalerkin };
enum class StabilizationKind { Naive, Supremizer, Aggregation };

std::string_view to_string(ProblemKind kind);
std::string_view to_string(Formulation form);
std::string_view to_string(StabilizationKind kind);

ProblemKind parse_problem(std::string_view text);
Formulation parse_formulation(std::string_view text);
StabilizationKind parse_stabilization(std::string_view text);

// Error taxonomy. The CLI maps these onto distinct exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rbstab
