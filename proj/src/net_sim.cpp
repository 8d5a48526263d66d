#include "qopt/net_sim.hpp"

#include <map>
#include <utility>

#include "qopt/errors.hpp"

namespace qopt {

void BitLedger::add(const std::string& tag, Direction dir, int node,
                    std::int64_t bits, std::int64_t overhead_bits) {
  require_input(bits >= 0 && overhead_bits >= 0,
                "BitLedger::add: negative bit count");
  entries_.push_back(LedgerEntry{round_, tag, dir, node, bits, overhead_bits});
  total_bits_ += bits;
  total_overhead_ += overhead_bits;
}

std::int64_t BitLedger::bits_in_round(int r) const {
  std::int64_t sum = 0;
  for (const auto& e : entries_) {
    if (e.round == r) sum += e.bits;
  }
  return sum;
}

std::int64_t BitLedger::bits_for_tag(const std::string& tag) const {
  std::int64_t sum = 0;
  for (const auto& e : entries_) {
    if (e.tag == tag) sum += e.bits;
  }
  return sum;
}

std::int64_t BitLedger::bits_for_tag_in_round(const std::string& tag,
                                              int r) const {
  std::int64_t sum = 0;
  for (const auto& e : entries_) {
    if (e.round == r && e.tag == tag) sum += e.bits;
  }
  return sum;
}

bool BitLedger::consistent() const {
  std::int64_t bits = 0;
  std::int64_t overhead = 0;
  for (const auto& e : entries_) {
    bits += e.bits;
    overhead += e.overhead_bits;
  }
  return bits == total_bits_ && overhead == total_overhead_;
}

void BitLedger::write_csv(std::ostream& os) const {
  os << "round,tag,direction,node,bits,overhead_bits\n";
  for (const auto& e : entries_) {
    os << e.round << ',' << e.tag << ','
       << (e.dir == Direction::to_master ? "worker_to_master"
                                         : "master_to_worker")
       << ',' << e.node << ',' << e.bits << ',' << e.overhead_bits << '\n';
  }
}

std::vector<EncodedBlob> gather(const Topology& topo, BitLedger& ledger,
                                const std::string& tag,
                                const std::vector<EncodedBlob>& worker_blobs) {
  require_input(valid(topo), "gather: bad topology");
  require_input(static_cast<int>(worker_blobs.size()) == topo.n - 1,
                "gather: need exactly one blob per worker");
  int node = 0;
  for (const EncodedBlob& blob : worker_blobs) {
    if (node == topo.master) ++node;
    if (blob.payload_bits() > 0) {
      ledger.add(tag, Direction::to_master, node, blob.payload_bits(),
                 kMessageOverheadBits);
    }
    ++node;
  }
  return worker_blobs;
}

EncodedBlob broadcast(const Topology& topo, BitLedger& ledger,
                      const std::string& tag, const EncodedBlob& blob) {
  require_input(valid(topo), "broadcast: bad topology");
  if (blob.payload_bits() > 0) {
    for (int node = 0; node < topo.n; ++node) {
      if (node == topo.master) continue;
      ledger.add(tag, Direction::to_workers, node, blob.payload_bits(),
                 kMessageOverheadBits);
    }
  }
  return blob;
}

std::vector<ReportRow> report(const BitLedger& ledger) {
  std::map<std::pair<int, std::string>, std::int64_t> agg;
  for (const auto& e : ledger.entries()) {
    agg[{e.round, e.tag}] += e.bits;
  }
  std::vector<ReportRow> rows;
  std::int64_t cum = 0;
  for (const auto& [key, bits] : agg) {
    cum += bits;
    rows.push_back(ReportRow{key.first, key.second, bits, cum});
  }
  return rows;
}

}  // namespace qopt
