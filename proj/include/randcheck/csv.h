/*
 * Copyright 2026 The randcheck Authors.
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

#ifndef RANDCHECK_CSV_H_
#define RANDCHECK_CSV_H_

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace randcheck::csv {

// RFC 4180 reader: quoted fields may contain the delimiter, doubled quotes
// and newlines.
class Reader {
 public:
  Reader(std::istream& in, char delimiter) : in_(in), delimiter_(delimiter) {}

  // Next record, or nullopt at end of input. Throws std::runtime_error on an
  // unterminated quote.
  std::optional<std::vector<std::string>> Next();

  // 1-based line on which the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  char delimiter_;
  std::size_t next_line_ = 1;
  std::size_t record_line_ = 0;
};

std::string Escape(std::string_view field, char delimiter);

std::string JoinRow(const std::vector<std::string>& fields, char delimiter);

}  // namespace randcheck::csv

#endif  // RANDCHECK_CSV_H_
