#ifndef IFPROJ_ERRORS_HPP
#define IFPROJ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ifproj {

// base for everything this library throws on purpose
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// malformed input text (csv, graph files, constraint files, config)
struct ParseError : Error {
  using Error::Error;
};

// schema/reference problems: unknown column, unknown vertex, bad indices
struct SchemaError : Error {
  using Error::Error;
};

// values outside the contract: non-binary treatment, |gamma| too large, ...
struct DomainError : Error {
  using Error::Error;
};

// graph is not a DAG
struct CycleError : Error {
  using Error::Error;
};

// requested split cannot satisfy stratification
struct InfeasibleSplitError : Error {
  using Error::Error;
};

// estimation failed (all candidates failed, invariant violated, ...)
struct EstimationError : Error {
  using Error::Error;
};

}  // namespace ifproj

#endif
