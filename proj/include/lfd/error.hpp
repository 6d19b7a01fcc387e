/*
 * Copyright 2026 The LFD Authors.
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

#ifndef LFD_ERROR_HPP_
#define LFD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace lfd {

enum class ErrorKind {
  kInput,          // malformed or out-of-range input data / arguments
  kDegenerate,     // no disagreement to learn from
  kTraining,       // the discriminator or stacker could not be fit
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error InputError(const std::string& message) {
  return Error(ErrorKind::kInput, message);
}
inline Error DegenerateError(const std::string& message) {
  return Error(ErrorKind::kDegenerate, message);
}
inline Error TrainingError(const std::string& message) {
  return Error(ErrorKind::kTraining, message);
}
inline Error IoError(const std::string& message) {
  return Error(ErrorKind::kIo, message);
}

}  // namespace lfd

#endif  // LFD_ERROR_HPP_
