#pragma once

#include <stdexcept>
#include <string>

namespace dtsg {

// Errors carry the name of the component that raised them so the CLI can
// report "component: message" and choose an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string component, const std::string& what)
      : std::runtime_error(component + ": " + what), component_(std::move(component)) {}

  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

// Raised for configuration that cannot be satisfied (infeasible synthetic
// budgets, unknown keys, bad toggle sets).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtsg
