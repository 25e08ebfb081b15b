#ifndef HYPSTAB_ERRORS_HPP
#define HYPSTAB_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace hypstab {

/// A scenario or system that fails structural validation.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A required trailing submatrix of the coupling matrix is numerically singular.
class SingularSubmatrix : public std::runtime_error {
  public:
    SingularSubmatrix(int index, const std::string& msg)
        : std::runtime_error(msg), index_(index) {}
    int index() const { return index_; }

  private:
    int index_;
};

/// Newton iteration for a nonlinear boundary map left its convergence basin.
class NoConvergence : public std::runtime_error {
  public:
    explicit NoConvergence(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested time step violates the CFL bound.
class CFLViolation : public std::runtime_error {
  public:
    explicit CFLViolation(const std::string& msg) : std::runtime_error(msg) {}
};

/// State left the validated regime during a simulation.
class BlowUp : public std::runtime_error {
  public:
    explicit BlowUp(const std::string& msg) : std::runtime_error(msg) {}
};

/// Weight calibration could not find a finite dominating constant.
class CalibrationFailed : public std::runtime_error {
  public:
    explicit CalibrationFailed(const std::string& msg) : std::runtime_error(msg) {}
};

/// Scenario file failed schema validation; carries one message per defect.
class SchemaError : public std::runtime_error {
  public:
    explicit SchemaError(std::vector<std::string> messages)
        : std::runtime_error(join(messages)), messages_(std::move(messages)) {}
    const std::vector<std::string>& messages() const { return messages_; }

  private:
    static std::string join(const std::vector<std::string>& msgs) {
        std::string out;
        for (const auto& m : msgs) {
            if (!out.empty()) out += "\n";
            out += m;
        }
        return out;
    }
    std::vector<std::string> messages_;
};

class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hypstab

#endif
