#pragma once

#include <stdexcept>
#include <string>

namespace planprobe {

/// Broad failure class; the CLI maps each to a distinct exit code.
enum class ErrorKind {
  invalid_parameter,
  invalid_data,
  degenerate_data,
  format,
  alignment,
  parse,
  linkage,
  transport,
  file,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid parameter";
    case ErrorKind::invalid_data: return "invalid data";
    case ErrorKind::degenerate_data: return "degenerate data";
    case ErrorKind::format: return "format error";
    case ErrorKind::alignment: return "alignment error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::linkage: return "linkage error";
    case ErrorKind::transport: return "transport error";
    case ErrorKind::file: return "file error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PLANPROBE_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

PLANPROBE_DEFINE_ERROR(InvalidParameterError, invalid_parameter)
PLANPROBE_DEFINE_ERROR(InvalidDataError, invalid_data)
PLANPROBE_DEFINE_ERROR(DegenerateDataError, degenerate_data)
PLANPROBE_DEFINE_ERROR(FormatError, format)
PLANPROBE_DEFINE_ERROR(AlignmentError, alignment)
PLANPROBE_DEFINE_ERROR(ParseError, parse)
PLANPROBE_DEFINE_ERROR(LinkageError, linkage)
PLANPROBE_DEFINE_ERROR(TransportError, transport)
PLANPROBE_DEFINE_ERROR(FileError, file)

#undef PLANPROBE_DEFINE_ERROR

}  // namespace planprobe
