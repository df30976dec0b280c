#pragma once

#include <stdexcept>
#include <string>

namespace scarfcn {

enum class ErrorKind {
  Config,
  Input,
  Shape,
  Generation,
  Training,
  Checkpoint,
  Io,
};

/// Base of every exception thrown by the library. The C API maps `kind()`
/// onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define SCARFCN_DEFINE_ERROR(Name, Kind)                               \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

SCARFCN_DEFINE_ERROR(ConfigError, Config)
SCARFCN_DEFINE_ERROR(InputError, Input)
SCARFCN_DEFINE_ERROR(ShapeError, Shape)
SCARFCN_DEFINE_ERROR(GenerationError, Generation)
SCARFCN_DEFINE_ERROR(TrainingError, Training)
SCARFCN_DEFINE_ERROR(CheckpointError, Checkpoint)
SCARFCN_DEFINE_ERROR(IoError, Io)

#undef SCARFCN_DEFINE_ERROR

}  // namespace scarfcn
