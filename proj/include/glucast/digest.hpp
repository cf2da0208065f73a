#pragma once

#include <string>
#include <string_view>

#include "glucast/core.hpp"

namespace glucast {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of the series' timestamps and values in a fixed text encoding.
std::string series_digest(const TimeSeries& series);

}  // namespace glucast
