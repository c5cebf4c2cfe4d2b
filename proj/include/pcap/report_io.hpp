#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace pcap {

/// Insertion-ordered JSON so report serialization is reproducible.
using Json = nlohmann::ordered_json;

std::string sha256_hex(std::string_view data);

void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

/// CSV with %.12g formatting; header row first.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string format_double(double v);

}  // namespace pcap
