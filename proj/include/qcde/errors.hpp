#pragma once

#include <stdexcept>
#include <string>

namespace qcde {

//! Base class for every failure raised by the library. `kind()` is the
//! stable error name surfaced by the command line tool.
class Error : public std::runtime_error
{
public:
  Error(std::string kind, const std::string& message);
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define QCDE_DECLARE_ERROR(Name)                                               \
  class Name : public Error                                                    \
  {                                                                            \
  public:                                                                      \
    explicit Name(const std::string& message)                                  \
      : Error(#Name, message)                                                  \
    {}                                                                         \
  }

QCDE_DECLARE_ERROR(InvalidArgument);
QCDE_DECLARE_ERROR(DimensionMismatch);
QCDE_DECLARE_ERROR(NonFiniteGrid);
QCDE_DECLARE_ERROR(PointOutsideGrid);
QCDE_DECLARE_ERROR(InverseMapFailure);
QCDE_DECLARE_ERROR(DegeneratePinning);
QCDE_DECLARE_ERROR(NonzeroCoefficients);
QCDE_DECLARE_ERROR(OrientationLoss);
QCDE_DECLARE_ERROR(RebuildDiverged);
QCDE_DECLARE_ERROR(NonpositiveJacobian);
QCDE_DECLARE_ERROR(BranchSearchIncomplete);
QCDE_DECLARE_ERROR(NegativeDensity);
QCDE_DECLARE_ERROR(FormatError);
QCDE_DECLARE_ERROR(ConfigError);

#undef QCDE_DECLARE_ERROR

} // namespace qcde
