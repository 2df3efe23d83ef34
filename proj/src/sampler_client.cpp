#include "qubofs/sampler_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <httplib.h>

namespace qubofs {

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_wire_request(const QuboProblem& problem) {
  std::ostringstream os;
  os << "qubo n=" << problem.size() << " k=";
  if (problem.k)
    os << *problem.k;
  else
    os << "*";
  os << " w=" << format_real(problem.penalty_weight) << "\n";
  for (int i = 0; i < problem.size(); ++i)
    for (int j = i; j < problem.size(); ++j) {
      const double v = i == j ? problem.q.at(i, i) : 2.0 * problem.q.at(i, j);
      if (v != 0.0) os << i << " " << j << " " << format_real(v) << "\n";
    }
  return os.str();
}

QuboProblem parse_wire_request(const std::string& text) {
  std::istringstream in(text);
  std::string keyword, n_field, k_field, w_field;
  if (!(in >> keyword >> n_field >> k_field >> w_field) || keyword != "qubo" ||
      n_field.rfind("n=", 0) != 0 || k_field.rfind("k=", 0) != 0 || w_field.rfind("w=", 0) != 0)
    throw ProtocolError("malformed request header");
  QuboProblem problem;
  int n = 0;
  try {
    n = std::stoi(n_field.substr(2));
    const std::string k_str = k_field.substr(2);
    if (k_str != "*") problem.k = std::stoi(k_str);
    problem.penalty_weight = std::stod(w_field.substr(2));
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed request header: ") + e.what());
  }
  if (n < 0) throw ProtocolError("negative problem size");
  problem.q = SymMatrix(n);
  int i = 0, j = 0;
  double v = 0.0;
  while (in >> i >> j >> v) {
    if (i < 0 || j < i || j >= n)
      throw ProtocolError("triplet (" + std::to_string(i) + "," + std::to_string(j) +
                          ") out of range for n=" + std::to_string(n));
    if (i == j)
      problem.q.set_sym(i, i, v);
    else
      problem.q.set_sym(i, j, v / 2.0);
  }
  return problem;
}

std::string format_wire_response(const BitVector& bits, double energy_value) {
  std::ostringstream os;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i > 0) os << " ";
    os << static_cast<int>(bits[i]);
  }
  os << "\nenergy=" << format_real(energy_value) << "\n";
  return os.str();
}

std::pair<BitVector, double> parse_wire_response(const std::string& text, int expected_size) {
  std::istringstream in(text);
  std::string bits_line, energy_line;
  if (!std::getline(in, bits_line) || !std::getline(in, energy_line))
    throw ProtocolError("truncated response");
  BitVector bits;
  std::istringstream bl(bits_line);
  std::string tok;
  while (bl >> tok) {
    if (tok == "0")
      bits.push_back(0);
    else if (tok == "1")
      bits.push_back(1);
    else
      throw ProtocolError("bad bit token \"" + tok + "\" in response");
  }
  if (static_cast<int>(bits.size()) != expected_size)
    throw ProtocolError("expected " + std::to_string(expected_size) + " bits, got " +
                        std::to_string(bits.size()));
  if (energy_line.rfind("energy=", 0) != 0)
    throw ProtocolError("missing energy line in response");
  double e = 0.0;
  try {
    e = std::stod(energy_line.substr(7));
  } catch (const std::exception&) {
    throw ProtocolError("bad energy value \"" + energy_line.substr(7) + "\"");
  }
  return {bits, e};
}

LoopbackStubTransport::LoopbackStubTransport(SolverConfig config) : config_(std::move(config)) {
  config_.kind = SolverKind::sa;
}

std::string LoopbackStubTransport::roundtrip(const std::string& request) {
  const QuboProblem problem = parse_wire_request(request);
  const SolveResult res = solve_sa(problem, config_);
  return format_wire_response(res.best, res.best_energy);
}

HttpTransport::HttpTransport(std::string url, double timeout_s) : timeout_s_(timeout_s) {
  const auto scheme_end = url.find("://");
  const auto path_start = scheme_end == std::string::npos
                              ? url.find('/')
                              : url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = url;
    path_ = "/";
  } else {
    base_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

std::string HttpTransport::roundtrip(const std::string& request) {
  httplib::Client client(base_);
  client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
  client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
  auto res = client.Post(path_, request, "text/plain");
  if (!res)
    throw TransportError("endpoint " + base_ + path_ +
                         " unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("endpoint " + base_ + path_ + " returned HTTP " +
                         std::to_string(res->status));
  return res->body;
}

SolveResult external_sampler_submit(const QuboProblem& problem, SamplerTransport& transport) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string reply = transport.roundtrip(format_wire_request(problem));
  auto [bits, reported] = parse_wire_response(reply, problem.size());
  const double local = energy(problem, bits);
  if (std::abs(local - reported) > 1e-6 * std::max(1.0, std::abs(local)))
    throw ProtocolError("reported energy " + std::to_string(reported) +
                        " disagrees with local recomputation " + std::to_string(local));
  SolveResult result;
  result.best = std::move(bits);
  result.best_energy = local;
  result.solver_tag = transport.tag();
  result.evaluations = 1;
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace qubofs
