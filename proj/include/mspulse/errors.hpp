#pragma once

#include <stdexcept>
#include <string>

namespace mspulse {

// Process exit codes used by the CLI. Library code throws typed errors;
// the CLI maps them via Error::exit_code().
enum class ErrorCode : int {
  infeasible = 2,  // no pulse exists / outside allowed area
  convergence = 3, // an iteration or step-size refinement did not converge
  config = 4,      // bad input: config file, domain, sizes
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& type, const std::string& msg)
      : std::runtime_error(msg), code_(code), type_(type) {}
  int exit_code() const { return static_cast<int>(code_); }
  const std::string& type() const { return type_; }

 private:
  ErrorCode code_;
  std::string type_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg)
      : Error(ErrorCode::config, "config", msg) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg)
      : Error(ErrorCode::config, "domain", msg) {}
};

class SizeError : public Error {
 public:
  explicit SizeError(const std::string& msg)
      : Error(ErrorCode::config, "size", msg) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double residual)
      : Error(ErrorCode::convergence, "convergence", msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& msg, int mode_index)
      : Error(ErrorCode::config, "instability", msg), mode_(mode_index) {}
  int mode_index() const { return mode_; }

 private:
  int mode_;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& msg, double sigma_min)
      : Error(ErrorCode::infeasible, "infeasible", msg), sigma_min_(sigma_min) {}
  double sigma_min() const { return sigma_min_; }

 private:
  double sigma_min_;
};

class PhaseUnreachableError : public Error {
 public:
  explicit PhaseUnreachableError(const std::string& msg)
      : Error(ErrorCode::infeasible, "phase_unreachable", msg) {}
};

class AllowedAreaError : public Error {
 public:
  AllowedAreaError(const std::string& msg, double worst_time, double margin)
      : Error(ErrorCode::infeasible, "outside_allowed_area", msg),
        worst_time_(worst_time), margin_(margin) {}
  double worst_time() const { return worst_time_; }
  // max |Omega_lin| / (C mu); > 1 means outside
  double margin() const { return margin_; }

 private:
  double worst_time_;
  double margin_;
};

class StepConvergenceError : public Error {
 public:
  StepConvergenceError(const std::string& msg, double fidelity_fine, double fidelity_coarse)
      : Error(ErrorCode::convergence, "step_convergence", msg),
        fine_(fidelity_fine), coarse_(fidelity_coarse) {}
  double fidelity_fine() const { return fine_; }
  double fidelity_coarse() const { return coarse_; }

 private:
  double fine_, coarse_;
};

} // namespace mspulse
