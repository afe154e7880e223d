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

#include "dzoo/remote_victim.h"

#include <cmath>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace dzoo {

using nlohmann::json;

std::string encode_classify_request(const std::vector<Tokens>& batch) {
  json texts = json::array();
  for (const auto& tokens : batch) texts.push_back(tokens);
  return json{{"texts", std::move(texts)}}.dump();
}

std::vector<ProbabilityVector> decode_classify_response(const std::string& body,
                                                        std::size_t expected_rows,
                                                        std::size_t num_classes) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("response is not json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("probabilities") || !doc["probabilities"].is_array()) {
    throw ProtocolError("response lacks a \"probabilities\" array");
  }
  const auto& rows = doc["probabilities"];
  if (rows.size() != expected_rows) {
    throw ProtocolError("response has " + std::to_string(rows.size()) + " rows, expected " +
                        std::to_string(expected_rows));
  }
  std::vector<ProbabilityVector> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != num_classes) {
      throw ProtocolError("probability row has wrong length, expected " +
                          std::to_string(num_classes));
    }
    std::vector<double> probs;
    probs.reserve(row.size());
    double sum = 0.0;
    for (const auto& v : row) {
      // nlohmann encodes NaN as null.
      if (!v.is_number()) throw ProtocolError("probability is not a number");
      const double p = v.get<double>();
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        std::ostringstream msg;
        msg << "probability " << p << " outside [0, 1]";
        throw ProtocolError(msg.str());
      }
      probs.push_back(p);
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-3) {
      std::ostringstream msg;
      msg << "probabilities sum " << sum;
      throw ProtocolError(msg.str());
    }
    for (double& p : probs) p /= sum;
    out.push_back(ProbabilityVector::from(std::move(probs), 1e-9));
  }
  return out;
}

namespace {

class RemoteVictim final : public Victim {
 public:
  explicit RemoteVictim(RemoteVictimOptions options) : options_(std::move(options)) {
    if (options_.num_classes < 2) throw std::invalid_argument("remote victim: need >= 2 classes");
    const auto scheme = options_.endpoint.find("://");
    if (scheme == std::string::npos) {
      throw std::invalid_argument("remote victim: endpoint must be scheme://host[:port][/path]");
    }
    const auto slash = options_.endpoint.find('/', scheme + 3);
    host_ = options_.endpoint.substr(0, slash);
    std::string base = slash == std::string::npos ? "" : options_.endpoint.substr(slash);
    while (!base.empty() && base.back() == '/') base.pop_back();
    path_ = base + "/classify";
  }

  std::size_t num_classes() const override { return options_.num_classes; }

  ProbabilityVector classify(const Tokens& tokens) const override {
    const std::string body = encode_classify_request({tokens});
    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= options_.retries; ++attempt) {
      auto res = client.Post(path_, body, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        throw ProtocolError("victim returned HTTP status " + std::to_string(res->status));
      }
      return decode_classify_response(res->body, 1, options_.num_classes).front();
    }
    throw VictimUnavailable("victim " + options_.endpoint + " unavailable after " +
                            std::to_string(options_.retries + 1) + " attempts: " + last_error);
  }

 private:
  RemoteVictimOptions options_;
  std::string host_;
  std::string path_;
};

}  // namespace

std::shared_ptr<const Victim> make_remote_victim(RemoteVictimOptions options) {
  return std::make_shared<RemoteVictim>(std::move(options));
}

}  // namespace dzoo
