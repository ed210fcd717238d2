/* Copyright 2026 The bsannot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Scripted stand-in for an external model, speaking the adapter protocol on
// stdin/stdout. The mode argument selects its behaviour.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "uniform";
  std::string line;
  int n = 0;
  while (std::getline(std::cin, line)) {
    ++n;
    const auto req = nlohmann::json::parse(line);
    const std::string id = req.at("id");
    nlohmann::json reply = {{"id", id}, {"probs", {{"SB", 0.25}, {"MB", 0.25}, {"CRS", 0.25}, {"HS", 0.25}}}};
    if (mode == "badsum") {
      reply["probs"] = {{"SB", 0.2}, {"MB", 0.2}, {"CRS", 0.2}, {"HS", 0.2}};
    } else if (mode == "extra-label") {
      reply["probs"]["None"] = 0.0;
    } else if (mode == "garbage") {
      std::cout << "not json\n" << std::flush;
      continue;
    } else if (mode == "silent") {
      continue;
    } else if (mode == "exit") {
      return 0;
    } else if (mode == "stale-first") {
      // An unrelated reply precedes the real one.
      std::cout << nlohmann::json{{"id", "other"}, {"probs", reply["probs"]}}.dump() << "\n";
    } else if (mode == "length") {
      // Encodes the request length in the HS probability.
      const double len = static_cast<double>(req.at("samples").size());
      const double hs = len / (len + 1000.0);
      const double rest = (1.0 - hs) / 3.0;
      reply["probs"] = {{"SB", rest}, {"MB", rest}, {"CRS", rest}, {"HS", hs}};
    } else if (mode == "slow-once" && n == 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(600));
    }
    std::cout << reply.dump() << "\n" << std::flush;
  }
  return 0;
}
