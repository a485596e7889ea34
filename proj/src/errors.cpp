#include "wgsef/errors.hpp"

namespace wgsef {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::OverlappingGroups: return "OverlappingGroups";
    case Errc::IncompleteCover: return "IncompleteCover";
    case Errc::NonpositiveWeight: return "NonpositiveWeight";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonpositiveEta: return "NonpositiveEta";
    case Errc::NoSignChange: return "NoSignChange";
    case Errc::NonpositiveStep: return "NonpositiveStep";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::SchemeNotApplicable: return "SchemeNotApplicable";
    case Errc::ScheduleExhausted: return "ScheduleExhausted";
    case Errc::DataEmpty: return "DataEmpty";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::BadModelFile: return "BadModelFile";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace wgsef
