#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <string>
#include <vector>

#include "json.hpp"

namespace traceval::jsonl {

using json = nlohmann::json;

struct BadLine {
    std::size_t line_no = 0;  // 1-based
    std::string reason;
};

// Calls `on_record` for every line that parses as a JSON object; collects the
// rest as BadLine entries. Blank lines are skipped.
void for_each_line(std::istream& in,
                   const std::function<void(std::size_t, json)>& on_record,
                   std::vector<BadLine>& bad);

std::vector<json> read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const std::vector<json>& records);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace traceval::jsonl
