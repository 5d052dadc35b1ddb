// Copyright 2026 The egfl authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EGFL_IO_HPP_
#define EGFL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace egfl {

// Shortest round-trip decimal rendering (std::to_chars); parsing the result
// back recovers the exact double, which keeps artifacts byte-stable.
std::string format_double(double v);

double parse_double(const std::string& s, int line = 0);
long parse_long(const std::string& s, int line = 0);

std::string read_file(const std::filesystem::path& path);
// Truncate-overwrite so rewrites of identical content stay byte-identical.
void write_file(const std::filesystem::path& path, const std::string& content);

// FNV-1a 64-bit content hash, hex-encoded; used by run manifests.
std::string fnv1a_hex(const std::string& bytes);

// Flat key=value configuration text: one pair per line, '#' comments,
// blank lines ignored. Keys must be unique.
std::map<std::string, std::string> parse_key_value(const std::string& text);

// Splits a CSV line; no quoting, numeric payloads only.
std::vector<std::string> split_csv_line(const std::string& line);

std::vector<double> parse_double_list(const std::string& csv);

}  // namespace egfl

#endif  // EGFL_IO_HPP_
