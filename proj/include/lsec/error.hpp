#pragma once

#include <stdexcept>
#include <string>

namespace lsec {

// Broad failure classes. The CLI maps these onto exit codes.
enum class ErrorKind {
  Usage,     // bad command line or manifest
  Data,      // malformed input files, out-of-range ids, contract violations on data
  Runtime,   // numeric failures, analysis failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& msg)
      : std::runtime_error(msg), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

#define LSEC_DEFINE_ERROR(Name, Kind, Code)                    \
  class Name : public Error {                                  \
   public:                                                     \
    explicit Name(const std::string& msg)                      \
        : Error(ErrorKind::Kind, Code, msg) {}                 \
  };

LSEC_DEFINE_ERROR(ParseError, Data, "parse")
LSEC_DEFINE_ERROR(IndexError, Data, "index")
LSEC_DEFINE_ERROR(ContractError, Data, "contract")
LSEC_DEFINE_ERROR(ArgumentError, Usage, "argument")
LSEC_DEFINE_ERROR(ConfigError, Usage, "config")
LSEC_DEFINE_ERROR(ShapeError, Runtime, "shape")
LSEC_DEFINE_ERROR(NumericError, Runtime, "numeric")
LSEC_DEFINE_ERROR(AnalysisError, Runtime, "analysis")
LSEC_DEFINE_ERROR(IoError, Data, "io")

#undef LSEC_DEFINE_ERROR

}  // namespace lsec
