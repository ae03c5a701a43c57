// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace spanret {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (bad JSON line, bad run/qrels record, corrupt index).
struct parse_error : error {
  using error::error;
};

// Well-formed input that violates a data invariant (duplicate doc_id, ...).
struct integrity_error : error {
  using error::error;
};

// Operation precondition violated by the caller.
struct domain_error : error {
  using error::error;
};

// Bad configuration (unknown policy, missing allowlist file, ...).
struct config_error : error {
  using error::error;
};

// External process broke the wire protocol.
struct protocol_error : error {
  using error::error;
};

// External process died, timed out, or never completed the handshake.
struct session_error : error {
  using error::error;
};

// An internal invariant failed; maps to exit code 2 in the CLI.
struct internal_error : error {
  using error::error;
};

// Decoder failure modes. E1: no admissible first token. E2: every
// hypothesis died before reaching the minimum span length.
struct decode_error : error {
  enum class code { empty_first_candidates, all_hypotheses_died };
  decode_error(code c, const std::string& msg) : error(msg), which(c) {}
  code which;
};

}  // namespace spanret
