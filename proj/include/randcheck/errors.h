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

#ifndef RANDCHECK_ERRORS_H_
#define RANDCHECK_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace randcheck {

// Violated precondition or shape rule.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed corpus file. `row` is 1-based and counts the header line.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(std::size_t row, const std::string& what)
      : std::runtime_error(row == 0 ? what
                                    : "row " + std::to_string(row) + ": " +
                                          what),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// Invalid experiment configuration; `field` is a dotted path such as
// "train.patience".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace randcheck

#endif  // RANDCHECK_ERRORS_H_
