/*
 * Copyright 2026 The mixopt Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Small file and CSV helpers shared by the artifact writers.

#ifndef MIXOPT_TEXT_IO_H_
#define MIXOPT_TEXT_IO_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mixopt {

// Decimal scientific notation with exactly 12 significant digits,
// e.g. 7.50000000000e-01.
std::string format_sig12(double value);

// Parses a full field as a double; throws IoError naming `what` otherwise.
double parse_double(std::string_view field, std::string_view what);

std::string read_file(const std::filesystem::path& path);

// Writes `contents` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Splits one CSV line on commas. Fields never contain commas or quotes in the
// formats written here.
std::vector<std::string> split_csv_line(std::string_view line);

// Splits text into lines, dropping a trailing empty line and any '\r'.
std::vector<std::string> split_lines(std::string_view text);

// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

}  // namespace mixopt

#endif  // MIXOPT_TEXT_IO_H_
