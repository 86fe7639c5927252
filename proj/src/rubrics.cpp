// SPDX-License-Identifier: Apache-2.0

#include "relate/rubrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace relate {

namespace {

void warn(Warnings& warnings, std::string message) {
  spdlog::warn("{}", message);
  warnings.push_back(std::move(message));
}

}  // namespace

CommitmentEstimate commitment_from_reply(const Json& reply, Warnings& warnings) {
  CommitmentEstimate c;
  double score = reply.at("score").get<double>();
  if (!std::isfinite(score)) {
    warn(warnings, "commitment score is not finite; using 1.0");
    score = kMinCommitment;
  } else if (score < kMinCommitment || score > kMaxCommitment) {
    const double clamped = std::clamp(score, kMinCommitment, kMaxCommitment);
    warn(warnings, fmt::format("commitment score {} outside [1,5], clamped to {}", score, clamped));
    score = clamped;
  }
  c.score = score;
  c.rationale = reply.at("rationale").get<std::string>();
  if (auto it = reply.find("evidence_refs"); it != reply.end() && it->is_array()) {
    for (const auto& ref : *it) c.evidence_refs.push_back(ref.get<std::string>());
  }
  return c;
}

AffectVector affect_from_reply(const Json& reply, Warnings& warnings) {
  std::array<double, kAffectDims> values{};
  for (std::size_t i = 0; i < kAffectDims; ++i) {
    const std::string name(kAffectNames[i]);
    auto it = reply.find(name);
    if (it == reply.end() || !it->is_number()) {
      warn(warnings, fmt::format("affect dimension '{}' missing, defaulting to 0.0", name));
      continue;
    }
    const double v = it->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
      const double clamped = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
      warn(warnings, fmt::format("affect '{}' = {} outside [0,1], clamped to {}", name, v, clamped));
      values[i] = clamped;
    } else {
      values[i] = v;
    }
  }
  return AffectVector(values);
}

}  // namespace relate
