#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace comedia {

using WarningSink = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink (stderr by default); returns the
/// previous one so tests can restore it.
WarningSink set_warning_sink(WarningSink sink);

void warn(std::string_view message);

}  // namespace comedia
