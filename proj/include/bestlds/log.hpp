#pragma once

#include <functional>
#include <string_view>

namespace bestlds {

using WarningSink = std::function<void(std::string_view)>;

/// Emits a non-fatal diagnostic. Defaults to stderr.
void warn(std::string_view message);

/// Replaces the warning sink; returns the previous one. Passing an empty
/// function silences warnings.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace bestlds
