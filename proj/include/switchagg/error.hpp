/*
  Copyright 2026 The switchagg Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

     http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

/**
 * @file error.hpp
 * @brief Error codes shared by every switchagg module.
 */

#ifndef SWITCHAGG_ERROR_HPP_
#define SWITCHAGG_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace switchagg {

enum class Errc {
    kInvalidPacket,
    kInvalidConfig,
    kSlotOutOfRange,
    kWorkerIdOutOfRange,
    kEmptyUpdate,
    kRetriesExhausted,
    kNotComplete,
    kEmptyInput,
    kDegenerateBound,
    kOverflow,
    kStalled,
    kConfigMismatch,
    kOrderMismatch,
    kSocketError,
};

std::string_view to_string(Errc code) noexcept;

/** Exception carrying one of the library error codes. */
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

}  // namespace switchagg

#endif  // SWITCHAGG_ERROR_HPP_
