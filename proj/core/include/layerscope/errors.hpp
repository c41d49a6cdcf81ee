// Copyright 2026 The LayerScope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LAYERSCOPE_ERRORS_HPP_
#define LAYERSCOPE_ERRORS_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace layerscope {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Architecture string rejected. `token_index` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t token_index)
      : Error(message), token_index_(token_index) {}
  std::size_t token_index() const { return token_index_; }

 private:
  std::size_t token_index_;
};

// Dataset file rejected. Each malformed-input class has its own kind.
class LoadError : public Error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kTruncated,
    kCountMismatch,
    kBadRecordLength,
    kLabelOutOfRange,
    kBadDescriptor,
  };

  LoadError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(LoadError::Kind kind);

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch)
      : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

// A partition plan needs more secure memory than the budget allows.
class BudgetError : public Error {
 public:
  BudgetError(std::uint64_t total_bytes, std::uint64_t budget_bytes)
      : Error("secure region needs " + std::to_string(total_bytes) + " bytes, budget is " +
              std::to_string(budget_bytes)),
        total_bytes_(total_bytes),
        budget_bytes_(budget_bytes) {}
  std::uint64_t total_bytes() const { return total_bytes_; }
  std::uint64_t budget_bytes() const { return budget_bytes_; }

 private:
  std::uint64_t total_bytes_;
  std::uint64_t budget_bytes_;
};

// Host/worker channel failure: crash, EOF, or an unexpected frame.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

}  // namespace layerscope

#endif  // LAYERSCOPE_ERRORS_HPP_
