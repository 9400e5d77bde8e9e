#pragma once

namespace bracket {

/// Library/tool version, embedded in CLI reports.
inline constexpr const char* kVersion = "0.1.0";

/// Structured-report schema version (see tools/bracket_att).
inline constexpr int kReportSchemaVersion = 1;

}  // namespace bracket
