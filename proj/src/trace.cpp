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

#include "switchagg/trace.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace switchagg {
namespace {

constexpr std::array<std::string_view, 13> kKindNames = {
    "send",      "deliver", "drop",      "dup",     "corrupt", "reject", "timeout",
    "aggregate", "ignore",  "multicast", "unicast", "stale",   "done",
};

std::string site_name(const TraceEvent& e) {
    const std::string w = "w" + std::to_string(e.node);
    switch (e.site) {
        case TraceSite::kSwitch: return "switch";
        case TraceSite::kWorker: return w;
        case TraceSite::kUplink: return "up:" + w;
        case TraceSite::kDownlink: return "down:" + w;
    }
    return "?";
}

void parse_site(std::string_view at, TraceEvent& e) {
    auto worker_index = [](std::string_view s) {
        if (s.size() < 2 || s[0] != 'w') {
            throw std::invalid_argument("bad endpoint");
        }
        return static_cast<std::uint16_t>(std::stoul(std::string(s.substr(1))));
    };
    if (at == "switch") {
        e.site = TraceSite::kSwitch;
    } else if (at.starts_with("up:")) {
        e.site = TraceSite::kUplink;
        e.node = worker_index(at.substr(3));
    } else if (at.starts_with("down:")) {
        e.site = TraceSite::kDownlink;
        e.node = worker_index(at.substr(5));
    } else {
        e.site = TraceSite::kWorker;
        e.node = worker_index(at);
    }
}

}  // namespace

std::string_view to_string(TraceKind kind) noexcept {
    return kKindNames[static_cast<std::size_t>(kind)];
}

std::size_t SimTrace::count(TraceKind kind) const noexcept {
    return static_cast<std::size_t>(std::count_if(
        events.begin(), events.end(), [kind](const TraceEvent& e) { return e.kind == kind; }));
}

std::string SimTrace::to_jsonl() const {
    std::ostringstream out;
    for (const auto& e : events) {
        nlohmann::ordered_json j;
        j["t"] = e.time;
        j["ev"] = to_string(e.kind);
        j["at"] = site_name(e);
        j["wid"] = e.wid;
        j["ver"] = e.ver;
        j["idx"] = e.idx;
        j["off"] = e.off;
        out << j.dump() << '\n';
    }
    return out.str();
}

SimTrace SimTrace::from_jsonl(std::string_view text) {
    SimTrace trace;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto j = nlohmann::json::parse(line);
        TraceEvent e;
        e.time = j.at("t").get<std::int64_t>();
        const auto kind = j.at("ev").get<std::string>();
        const auto it = std::find(kKindNames.begin(), kKindNames.end(), kind);
        if (it == kKindNames.end()) {
            throw std::invalid_argument("unknown event kind " + kind);
        }
        e.kind = static_cast<TraceKind>(it - kKindNames.begin());
        parse_site(j.at("at").get<std::string>(), e);
        e.wid = j.at("wid").get<std::uint16_t>();
        e.ver = j.at("ver").get<std::uint8_t>();
        e.idx = j.at("idx").get<std::uint16_t>();
        e.off = j.at("off").get<std::uint32_t>();
        trace.events.push_back(e);
    }
    return trace;
}

}  // namespace switchagg
