#include "traceval/jsonl.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace traceval::jsonl {

void for_each_line(std::istream& in,
                   const std::function<void(std::size_t, json)>& on_record,
                   std::vector<BadLine>& bad) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            bad.push_back({line_no, "invalid JSON"});
            continue;
        }
        if (!j.is_object()) {
            bad.push_back({line_no, "not a JSON object"});
            continue;
        }
        on_record(line_no, std::move(j));
    }
}

std::vector<json> read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<json> out;
    std::vector<BadLine> bad;
    for_each_line(in, [&](std::size_t, json j) { out.push_back(std::move(j)); }, bad);
    if (!bad.empty()) {
        throw std::runtime_error(path.string() + ": line " +
                                 std::to_string(bad.front().line_no) + ": " +
                                 bad.front().reason);
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) out << r.dump() << '\n';
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace traceval::jsonl
