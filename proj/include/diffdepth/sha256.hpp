#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

namespace diffdepth {

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace diffdepth
