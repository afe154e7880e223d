// Copyright 2026 The dzoo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DZOO_REMOTE_VICTIM_H_
#define DZOO_REMOTE_VICTIM_H_

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "dzoo/victim.h"

namespace dzoo {

// Wire format for POST <endpoint>/classify:
//   request  {"texts": [["tok1","tok2",...], ...]}
//   response {"probabilities": [[p1,...,pC], ...]}
std::string encode_classify_request(const std::vector<Tokens>& batch);

// Validates shape and values: one row per input, `num_classes` entries per
// row, no NaN, each row summing to 1 within 1e-3. Rows are renormalized to
// sum exactly to one. Throws ProtocolError.
std::vector<ProbabilityVector> decode_classify_response(const std::string& body,
                                                        std::size_t expected_rows,
                                                        std::size_t num_classes);

struct RemoteVictimOptions {
  std::string endpoint;  // scheme://host:port[/base]
  std::size_t num_classes = 2;
  std::chrono::milliseconds timeout{5000};
  // Extra attempts after the first on network failure.
  std::size_t retries = 2;
};

// HTTP victim. Network failure after 1 + retries attempts raises
// VictimUnavailable; bad status or payload raises ProtocolError.
std::shared_ptr<const Victim> make_remote_victim(RemoteVictimOptions options);

}  // namespace dzoo

#endif  // DZOO_REMOTE_VICTIM_H_
