#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace aserv {

std::vector<std::string_view> split(std::string_view text, char delim);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Fixed number of decimals, for generated attribute columns.
std::string format_fixed(double v, int decimals);

/// Zero-padded decimal so lexicographic order matches numeric order.
std::string zero_pad(long long v, int width);

template <typename T>
T parse_number(std::string_view text) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace aserv
