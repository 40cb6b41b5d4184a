#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "icupred/types.hpp"

namespace icupred {

std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Write-to-temp then rename, so a crash never leaves a partial artifact.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

}  // namespace icupred
