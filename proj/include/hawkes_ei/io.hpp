#pragma once

#include <array>
#include <charconv>
#include <ostream>
#include <string>
#include <vector>

#include "hawkes_ei/simulator.hpp"

namespace hawkes_ei {

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline void write_states_csv(std::ostream& os, const std::vector<SystemState>& rows) {
  os << "t,x_plus,x_minus\n";
  for (const SystemState& s : rows)
    os << format_double(s.t) << ',' << format_double(s.x_plus) << ','
       << format_double(s.x_minus) << '\n';
}

inline void write_events_csv(std::ostream& os, const std::vector<EventRecord>& events) {
  os << "t,pop,unit\n";
  for (const EventRecord& e : events)
    os << format_double(e.t) << ',' << population_char(e.pop) << ',' << e.unit << '\n';
}

}  // namespace hawkes_ei
