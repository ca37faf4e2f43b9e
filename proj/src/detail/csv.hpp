#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace brief::detail {

std::string csv_field(std::string_view value);
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace brief::detail
