#pragma once

#include <stdexcept>
#include <string>

namespace pgwm {

// Error taxonomy used across the library. Every exception carries a short
// machine-parsable code (used by the CLI for its one-line error prefix)
// plus a human-readable message.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string &msg)
      : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string &code() const noexcept { return code_; }

private:
  std::string code_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string &msg) : Error("invalid-argument", msg) {}
};

struct DegeneratePose : Error {
  explicit DegeneratePose(const std::string &msg) : Error("degenerate-pose", msg) {}
};

struct InsufficientFrames : Error {
  explicit InsufficientFrames(const std::string &msg) : Error("insufficient-frames", msg) {}
};

struct InfeasibleMask : Error {
  explicit InfeasibleMask(const std::string &msg) : Error("infeasible-mask", msg) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string &msg) : Error("format-error", msg) {}
};

struct MismatchError : Error {
  explicit MismatchError(const std::string &msg) : Error("mismatch", msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string &msg) : Error("io-error", msg) {}
};

#define PGWM_CHECK(cond, exc_type, msg)                                        \
  do {                                                                         \
    if (!(cond)) throw exc_type(msg);                                          \
  } while (0)

} // namespace pgwm
