#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wgsef {

enum class Errc {
  OverlappingGroups,
  IncompleteCover,
  NonpositiveWeight,
  IndexOutOfRange,
  DimensionMismatch,
  NonpositiveEta,
  NoSignChange,
  NonpositiveStep,
  ShapeMismatch,
  NonScalarLoss,
  InvalidSpec,
  SchemeNotApplicable,
  ScheduleExhausted,
  DataEmpty,
  ConfigInvalid,
  BadMagic,
  TruncatedFile,
  CountMismatch,
  BadModelFile,
  Io,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace wgsef
