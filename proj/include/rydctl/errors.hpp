#ifndef RYDCTL_ERRORS_HPP
#define RYDCTL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rydctl {

/// Bad user input: malformed files, invalid parameters. CLI exit code 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A computation could not produce a trustworthy result. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define RYDCTL_DEFINE_ERROR(Name, Base)                                        \
  class Name : public Base {                                                   \
  public:                                                                      \
    explicit Name(const std::string &what) : Base(#Name ": " + what) {}        \
  };

RYDCTL_DEFINE_ERROR(NearPole, NumericalError)
RYDCTL_DEFINE_ERROR(AboveThreshold, InputError)
RYDCTL_DEFINE_ERROR(Degenerate, NumericalError)
RYDCTL_DEFINE_ERROR(PoleOutsideWindow, InputError)
RYDCTL_DEFINE_ERROR(QuadratureNotConverged, NumericalError)
RYDCTL_DEFINE_ERROR(NonPhysicalState, NumericalError)
RYDCTL_DEFINE_ERROR(TargetUnreachable, NumericalError)
RYDCTL_DEFINE_ERROR(ZeroShift, InputError)
RYDCTL_DEFINE_ERROR(Infeasible, InputError)
RYDCTL_DEFINE_ERROR(EmptyDataset, InputError)
RYDCTL_DEFINE_ERROR(DuplicateAbscissa, InputError)

#undef RYDCTL_DEFINE_ERROR

/// Malformed input text; carries the 1-based line number.
class ParseError : public InputError {
public:
  ParseError(std::size_t line, const std::string &what)
      : InputError("ParseError: line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace rydctl

#endif // RYDCTL_ERRORS_HPP
