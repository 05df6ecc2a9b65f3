#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hprm/core.hpp"

namespace hprm::io {

/// One JSON object per non-blank line. Parse failures name file and line.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Writes one compact object per line, each terminated by '\n'.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hprm::io
