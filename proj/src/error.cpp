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

#include "switchagg/error.hpp"

namespace switchagg {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::kInvalidPacket: return "InvalidPacket";
        case Errc::kInvalidConfig: return "InvalidConfig";
        case Errc::kSlotOutOfRange: return "SlotOutOfRange";
        case Errc::kWorkerIdOutOfRange: return "WorkerIdOutOfRange";
        case Errc::kEmptyUpdate: return "EmptyUpdate";
        case Errc::kRetriesExhausted: return "RetriesExhausted";
        case Errc::kNotComplete: return "NotComplete";
        case Errc::kEmptyInput: return "EmptyInput";
        case Errc::kDegenerateBound: return "DegenerateBound";
        case Errc::kOverflow: return "Overflow";
        case Errc::kStalled: return "Stalled";
        case Errc::kConfigMismatch: return "ConfigMismatch";
        case Errc::kOrderMismatch: return "OrderMismatch";
        case Errc::kSocketError: return "SocketError";
    }
    return "Unknown";
}

}  // namespace switchagg
