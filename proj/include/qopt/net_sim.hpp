#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "qopt/quantizer.hpp"

namespace qopt {

struct Topology {
  int n = 1;
  int master = 0;
};

inline bool valid(const Topology& t) {
  return t.n >= 1 && t.master >= 0 && t.master < t.n;
}

enum class Direction { to_master, to_workers };

struct LedgerEntry {
  int round = 0;
  std::string tag;
  Direction dir = Direction::to_master;
  int node = 0;  // sending node for gathers, receiving node for broadcasts
  std::int64_t bits = 0;
  std::int64_t overhead_bits = 0;
};

// Append-only record of every bit "sent" in a simulated run. Payload bits are
// the colors actually packed; the two full-precision scalars (distance and
// error bound) that parameterize each message are tracked separately in the
// overhead column, 64 bits each.
class BitLedger {
 public:
  void set_round(int r) { round_ = r; }
  int round() const { return round_; }

  void add(const std::string& tag, Direction dir, int node, std::int64_t bits,
           std::int64_t overhead_bits);

  std::int64_t total_bits() const { return total_bits_; }
  std::int64_t total_overhead() const { return total_overhead_; }
  std::int64_t bits_in_round(int r) const;
  std::int64_t bits_for_tag(const std::string& tag) const;
  std::int64_t bits_for_tag_in_round(const std::string& tag, int r) const;
  const std::vector<LedgerEntry>& entries() const { return entries_; }

  // running totals always equal the entry sums; checked on every flush
  bool consistent() const;

  // columns: round,tag,direction,node,bits,overhead_bits
  void write_csv(std::ostream& os) const;

 private:
  std::vector<LedgerEntry> entries_;
  std::int64_t total_bits_ = 0;
  std::int64_t total_overhead_ = 0;
  int round_ = 0;
};

constexpr std::int64_t kScalarBits = 64;
constexpr std::int64_t kMessageOverheadBits = 2 * kScalarBits;  // y and eps

// Deliver one blob per worker (ascending node index, master skipped) to the
// master, charging each blob's payload under `tag`. Zero-bit blobs leave the
// ledger untouched.
std::vector<EncodedBlob> gather(const Topology& topo, BitLedger& ledger,
                                const std::string& tag,
                                const std::vector<EncodedBlob>& worker_blobs);

// Deliver the master's blob to all n-1 workers, charging (n-1) x payload.
EncodedBlob broadcast(const Topology& topo, BitLedger& ledger,
                      const std::string& tag, const EncodedBlob& blob);

struct ReportRow {
  int round = 0;
  std::string tag;
  std::int64_t bits_round = 0;
  std::int64_t bits_cumulative = 0;
};

// Per (round, tag) aggregation in deterministic (round, tag) order.
std::vector<ReportRow> report(const BitLedger& ledger);

}  // namespace qopt
