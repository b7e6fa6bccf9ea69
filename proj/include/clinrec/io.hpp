#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace clinrec {

/// Writes to "<path>.tmp" and renames over `path` once complete.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Fixed-point decimal with `places` digits ("%.*f").
std::string format_fixed(double value, int places = 6);

}  // namespace clinrec
