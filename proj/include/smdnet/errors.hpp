#pragma once

#include <stdexcept>
#include <string>

namespace smdnet {

struct SmdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Variable-set / dimension mismatches between densities or models.
struct LayoutError : SmdError {
  using SmdError::SmdError;
};

// Loss of positive-definiteness, singular matrices, log-domain underflow.
struct NumericalError : SmdError {
  using SmdError::SmdError;
};

// Non-positive-definite information matrix produced by a variational update.
struct CurvatureError : NumericalError {
  using NumericalError::NumericalError;
};

// Non-finite log-likelihood value, violating the declared sup bound.
struct GradientBoundError : SmdError {
  using SmdError::SmdError;
};

// Disconnected graph or disconnected per-variable subgraph.
struct ConnectivityError : SmdError {
  using SmdError::SmdError;
};

// Missing or malformed neighbor message in a synchronous round.
struct ProtocolError : SmdError {
  using SmdError::SmdError;
};

// Input violates a documented structural contract (e.g. non-diagonal state).
struct ContractError : SmdError {
  using SmdError::SmdError;
};

// Scenario construction produced an unowned feature / unreachable variable.
struct CoverageError : SmdError {
  using SmdError::SmdError;
};

// Iterative routine failed to reach its tolerance within the iteration cap.
struct ConvergenceError : SmdError {
  using SmdError::SmdError;
};

// Experiment configuration failed validation; message carries the field path.
struct ConfigError : SmdError {
  using SmdError::SmdError;
};

}  // namespace smdnet
