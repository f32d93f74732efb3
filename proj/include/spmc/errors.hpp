#pragma once

#include <stdexcept>
#include <string>

namespace spmc {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Frozen generator has rank < m0 - 1, so no unique quasi-stationary
// distribution exists.
class RankDeficientError : public Error {
public:
    using Error::Error;
};

// Quasi-stationary solve produced an entry below -1e-8; the chain is not
// weakly irreducible in the intended sense.
class NegativeSolutionError : public Error {
public:
    using Error::Error;
};

// The system (1*nu - Q) backing the group inverse is numerically singular.
class SingularSystemError : public Error {
public:
    using Error::Error;
};

// Forcing term of a regular expansion equation has nonzero row sums, so the
// singular system has no solution.
class SolvabilityViolationError : public Error {
public:
    using Error::Error;
};

// A layer term failed to decay below threshold at the end of its tau grid.
class NoDecayError : public Error {
public:
    using Error::Error;
};

// The stiff propagator would need an internal step below 1e-14.
class StepUnderflowError : public Error {
public:
    using Error::Error;
};

// A sampled diagonal rate exceeded the scanned thinning bound.
class RateBoundExceededError : public Error {
public:
    using Error::Error;
};

// Too few points above the Monte Carlo noise floor to fit a decay slope.
class InsufficientResolutionError : public Error {
public:
    using Error::Error;
};

// Malformed configuration or specification input.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace spmc
