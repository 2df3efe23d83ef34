#pragma once

#include <string>
#include <utility>

#include "qubofs/solvers.hpp"

namespace qubofs {

// Text wire format spoken with external QUBO samplers.
//
// Request:  header `qubo n=<size> k=<k|*> w=<weight>` followed by one
//           `i j value` line per nonzero (i <= j; diagonal allowed;
//           off-diagonal values carry the full pair coefficient 2*Q_ij).
// Response: one line of n space-separated bits, then `energy=<real>`.
std::string format_wire_request(const QuboProblem& problem);
QuboProblem parse_wire_request(const std::string& text);
std::string format_wire_response(const BitVector& bits, double energy_value);
std::pair<BitVector, double> parse_wire_response(const std::string& text, int expected_size);

class SamplerTransport {
 public:
  virtual ~SamplerTransport() = default;
  virtual std::string roundtrip(const std::string& request) = 0;
  virtual std::string tag() const = 0;
};

// Default in-process endpoint: decodes the request, runs solve_sa under
// the given config and encodes the answer. Real QPU connectivity is out
// of scope; this keeps the full wire path exercised.
class LoopbackStubTransport : public SamplerTransport {
 public:
  explicit LoopbackStubTransport(SolverConfig config);
  std::string roundtrip(const std::string& request) override;
  std::string tag() const override { return "external-stub"; }

 private:
  SolverConfig config_;
};

// HTTP POST to a user-provided sampler endpoint, e.g.
// http://host:port/solve. Connection failures raise TransportError.
class HttpTransport : public SamplerTransport {
 public:
  explicit HttpTransport(std::string url, double timeout_s = 10.0);
  std::string roundtrip(const std::string& request) override;
  std::string tag() const override { return "external"; }

 private:
  std::string base_;
  std::string path_;
  double timeout_s_;
};

// Serializes the problem, round-trips it through the transport, validates
// the reply (bit length, energy consistency) and recomputes the energy
// locally. Transport failures yield no partial result.
SolveResult external_sampler_submit(const QuboProblem& problem, SamplerTransport& transport);

}  // namespace qubofs
