#include "qopt/trace.hpp"

#include <cstdio>

#include "qopt/errors.hpp"

namespace qopt {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void Trace::write_csv(std::ostream& os) const {
  os << "t,err,fgap,bound";
  for (const auto& name : slack_names) os << ',' << name;
  if (split_channels) os << ",hessian_bits,direction_bits";
  os << ",bits_round,bits_total,overhead_bits\n";
  for (const RoundTrace& r : rows) {
    require_input(r.slacks.size() == slack_names.size(),
                  "Trace: slack column mismatch");
    os << r.t << ',' << format_double(r.err) << ',' << format_double(r.fgap)
       << ',' << format_double(r.bound);
    for (double s : r.slacks) os << ',' << format_double(s);
    if (split_channels) os << ',' << r.hessian_bits << ',' << r.direction_bits;
    os << ',' << r.bits_round << ',' << r.bits_total << ',' << r.overhead_bits
       << '\n';
  }
}

}  // namespace qopt
