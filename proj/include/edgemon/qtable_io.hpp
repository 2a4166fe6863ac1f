#pragma once

// QTable file format (version 1)
//
// A text header of "key value..." lines, terminated by a line "data",
// followed by the payload as little-endian IEEE-754 binary64:
//
//   edgemon-qtable 1
//   servers <K>
//   aoi_max <A>
//   phi <phi_1> ... <phi_K>
//   psi <psi_1> ... <psi_K>
//   lambda <lambda>
//   lambda_sum <sum of lambda over dispatchers>
//   mu <mu>
//   tol <solver tolerance>
//   gain <average reward>
//   span_residual <final span>
//   sweeps <count>
//   states <S = (2A)^K>
//   actions <K + 1>
//   data
//   <S * (K+1) doubles: Q row-major by state, then action>
//   <S doubles: relative values h>
//
// Header reals are printed with 17 significant digits, so they round-trip
// exactly. State ids follow StateCodec.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "edgemon/error.hpp"
#include "edgemon/mdp.hpp"

namespace edgemon {

namespace detail {

inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_le(std::ostream& os, const std::vector<double>& values) {
  std::vector<char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<double> read_le(std::istream& is, std::size_t count) {
  std::vector<char> bytes(count * 8);
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) throw ValidationError("qtable: truncated payload");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace detail

inline void save_qtable(std::ostream& os, const QTable& t) {
  const auto& s = t.spec;
  os << "edgemon-qtable 1\n";
  os << "servers " << s.num_servers() << '\n';
  os << "aoi_max " << s.aoi_max << '\n';
  os << "phi";
  for (const auto& p : s.servers) os << ' ' << detail::fmt_real(p.phi());
  os << "\npsi";
  for (const auto& p : s.servers) os << ' ' << detail::fmt_real(p.psi());
  os << '\n';
  os << "lambda " << detail::fmt_real(s.lambda) << '\n';
  os << "lambda_sum " << detail::fmt_real(s.lambda_sum) << '\n';
  os << "mu " << detail::fmt_real(s.mu) << '\n';
  os << "tol " << detail::fmt_real(t.tol) << '\n';
  os << "gain " << detail::fmt_real(t.gain) << '\n';
  os << "span_residual " << detail::fmt_real(t.span_residual) << '\n';
  os << "sweeps " << t.sweeps << '\n';
  os << "states " << t.num_states << '\n';
  os << "actions " << t.num_actions << '\n';
  os << "data\n";
  detail::write_le(os, t.q);
  detail::write_le(os, t.values);
}

inline QTable load_qtable(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "edgemon-qtable 1") throw ValidationError("qtable: bad magic line");

  QTable t;
  int servers = -1;
  std::vector<double> phi;
  std::vector<double> psi;
  auto want = [&](const char* key) {
    if (!std::getline(is, line)) throw ValidationError(std::string("qtable: missing '") + key + "'");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw ValidationError(std::string("qtable: expected '") + key + "', found '" + k + "'");
    return ls;
  };
  auto reals = [&](const char* key, std::size_t n) {
    auto ls = want(key);
    std::vector<double> v(n);
    for (auto& x : v) {
      std::string tok;
      if (!(ls >> tok)) throw ValidationError(std::string("qtable: short '") + key + "' line");
      x = std::strtod(tok.c_str(), nullptr);
    }
    return v;
  };

  want("servers") >> servers;
  want("aoi_max") >> t.spec.aoi_max;
  if (servers < 1 || servers > kMaxServersPerDispatcher) throw ValidationError("qtable: bad server count");
  phi = reals("phi", static_cast<std::size_t>(servers));
  psi = reals("psi", static_cast<std::size_t>(servers));
  for (int k = 0; k < servers; ++k) t.spec.servers.emplace_back(phi[static_cast<std::size_t>(k)], psi[static_cast<std::size_t>(k)]);
  t.spec.lambda = reals("lambda", 1)[0];
  t.spec.lambda_sum = reals("lambda_sum", 1)[0];
  t.spec.mu = reals("mu", 1)[0];
  t.tol = reals("tol", 1)[0];
  t.gain = reals("gain", 1)[0];
  t.span_residual = reals("span_residual", 1)[0];
  want("sweeps") >> t.sweeps;
  want("states") >> t.num_states;
  want("actions") >> t.num_actions;
  want("data");
  t.spec.validate();

  const StateCodec codec(servers, t.spec.aoi_max);
  if (t.num_states != codec.size() || t.num_actions != servers + 1) {
    throw ValidationError("qtable: state/action counts do not match K and aoi_max");
  }
  t.q = detail::read_le(is, t.num_states * static_cast<StateId>(t.num_actions));
  t.values = detail::read_le(is, t.num_states);
  return t;
}

}  // namespace edgemon
