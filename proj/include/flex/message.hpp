#pragma once

// Wire format for the per-round broadcast of an area's tie-line quantities.
//
// Frame: 4-byte big-endian payload length, then one UTF-8 JSON object
//   {"sender": "...", "round": k, "ties": [{"id", "delta_t_mw", "theta_rad", "delta_price"}]}
// Numbers are printed with 17 significant digits so every double survives
// the round trip bit for bit.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "flex/errors.hpp"

namespace flex {

struct TieMessage {
  std::string id;
  double delta_t_mw = 0.0;
  double theta_rad = 0.0;
  double delta_price = 0.0;

  bool operator==(const TieMessage&) const = default;
};

struct ExchangeMessage {
  std::string sender;
  int round = 0;
  std::vector<TieMessage> ties;

  bool operator==(const ExchangeMessage&) const = default;
};

namespace detail {

inline std::string g17(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("encode_message: non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string out(buf);
  // Keep integral values floating-point on the wire so that -0 survives.
  if (out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

}  // namespace detail

inline std::string encode_message(const ExchangeMessage& m) {
  std::string body = "{\"sender\":" + nlohmann::json(m.sender).dump() + ",\"round\":" + std::to_string(m.round) +
                     ",\"ties\":[";
  for (std::size_t i = 0; i < m.ties.size(); ++i) {
    const auto& t = m.ties[i];
    if (i) body += ',';
    body += "{\"id\":" + nlohmann::json(t.id).dump() + ",\"delta_t_mw\":" + detail::g17(t.delta_t_mw) +
            ",\"theta_rad\":" + detail::g17(t.theta_rad) + ",\"delta_price\":" + detail::g17(t.delta_price) + "}";
  }
  body += "]}";
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string frame;
  frame.reserve(4 + body.size());
  for (int shift = 24; shift >= 0; shift -= 8) frame.push_back(static_cast<char>((n >> shift) & 0xFFu));
  return frame + body;
}

/// Decodes one frame. Throws ParseError on a malformed frame and
/// StaleMessageError when the round differs from expected_round.
inline ExchangeMessage decode_message(std::string_view frame, int expected_round) {
  if (frame.size() < 4) throw ParseError("message: frame shorter than its length prefix");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(frame[static_cast<std::size_t>(i)]);
  if (n != frame.size() - 4)
    throw ParseError("message: length prefix " + std::to_string(n) + " does not match payload size " +
                     std::to_string(frame.size() - 4));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(frame.substr(4));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("message: ") + e.what());
  }
  ExchangeMessage m;
  try {
    m.sender = j.at("sender").get<std::string>();
    m.round = j.at("round").get<int>();
    for (const auto& t : j.at("ties")) {
      TieMessage tm;
      tm.id = t.at("id").get<std::string>();
      tm.delta_t_mw = t.at("delta_t_mw").get<double>();
      tm.theta_rad = t.at("theta_rad").get<double>();
      tm.delta_price = t.at("delta_price").get<double>();
      m.ties.push_back(std::move(tm));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("message: ") + e.what());
  }
  if (m.round != expected_round) throw StaleMessageError(expected_round, m.round);
  return m;
}

}  // namespace flex
