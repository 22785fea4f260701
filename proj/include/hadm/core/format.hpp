#pragma once

#include <string>
#include <string_view>

namespace hadm::core {

/// Shortest decimal text that round-trips to `v`; integral values print
/// without a fraction and negative zero prints as "0".
std::string format_number(double v);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view text);

}  // namespace hadm::core
