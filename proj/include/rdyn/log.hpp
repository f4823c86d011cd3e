#pragma once

#include <functional>
#include <string_view>

namespace rdyn {

using WarningSink = std::function<void(std::string_view)>;

// Replaces the process-wide warning sink (default: one line on stderr) and
// returns the previous one. Not synchronized; set it before starting work.
WarningSink set_warning_sink(WarningSink sink);

void warn(std::string_view message);

}  // namespace rdyn
