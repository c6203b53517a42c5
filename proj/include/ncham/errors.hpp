#pragma once

#include <stdexcept>
#include <string>

namespace ncham {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operands have incompatible or non-square dimensions.
struct DimensionError : Error {
  using Error::Error;
};

/// Input violates a documented precondition (non-Hermitian density, bad size, ...).
struct InvalidInput : Error {
  using Error::Error;
};

/// Mixture weights are negative or do not sum to one.
struct InvalidWeights : Error {
  using Error::Error;
};

/// Morphism has no usable inverse.
struct SingularMorphism : Error {
  using Error::Error;
};

/// Two-form admits no (unique) Hamiltonian derivation; algebra has nontrivial center.
struct DegenerateStructure : Error {
  using Error::Error;
};

/// Generator of a would-be canonical flow is not self-adjoint.
struct InvalidGenerator : Error {
  using Error::Error;
};

/// Hamiltonian is not self-adjoint.
struct InvalidHamiltonian : Error {
  using Error::Error;
};

/// Phase-space objects live on different or incompatible grids.
struct GridMismatch : Error {
  using Error::Error;
};

/// Velocity gradient crossed the caustic threshold; fields are no longer single-valued.
struct CausticError : Error {
  CausticError(const std::string& msg, double t) : Error(msg), time(t) {}
  double time;
};

/// A characteristic left the computational domain.
struct DomainExit : Error {
  using Error::Error;
};

/// Phase requested at a node where the wave function vanishes.
struct PhaseUndefined : Error {
  using Error::Error;
};

/// Input state is concentrated where a truncated representation is unreliable.
struct PreconditionViolated : Error {
  using Error::Error;
};

/// Experiment configuration is malformed (unknown key, bad value, missing file).
struct ConfigError : Error {
  using Error::Error;
};

/// A numeric evaluation produced a non-finite value.
struct NumericsError : Error {
  using Error::Error;
};

}  // namespace ncham
