#pragma once

// On-disk form of a TrajectoryEnsemble: a JSON header next to a raw
// little-endian float64 payload ordered sample, record, component.

#include <filesystem>

#include "dynsc/integrate.hpp"

namespace dynsc::integrate {

/// Writes `header` (JSON) and the payload at `header` with extension ".bin".
/// Returns the payload path.
std::filesystem::path save_ensemble(const TrajectoryEnsemble& ens, const std::filesystem::path& header);

/// Throws Error on missing files, unknown layout or a truncated payload.
TrajectoryEnsemble load_ensemble(const std::filesystem::path& header);

}  // namespace dynsc::integrate
