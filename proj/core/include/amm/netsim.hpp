#pragma once

// Synchronous round-based message board. Engines publish node values as
// neighbor broadcasts and read them back through an audited fetch that refuses
// non-neighbor access. Every broadcast is logged per round for communication
// accounting; serial phase loops make traces bitwise deterministic.

#include <array>
#include <string>
#include <vector>

#include "amm/common.hpp"
#include "amm/graph.hpp"

namespace amm {

// Payload classes exchanged by the engines. `w` carries the combined
// y - grad f - q vector; `z` the penalty-plus-gradient auxiliary vector.
enum class PayloadTag { x, z_tilde, w, z };
inline constexpr int kPayloadTags = 4;

const char* payload_name(PayloadTag tag);

struct Message {
  int from = 0;
  int to = 0;
  PayloadTag tag = PayloadTag::x;
};

struct RoundLog {
  int round = 0;  // -1 for initialization traffic
  std::vector<Message> messages;
};

class NetSim {
 public:
  NetSim(Topology topo, int d);

  int nodes() const { return topo_.nodes(); }
  int dim() const { return d_; }
  const Topology& topology() const { return topo_; }
  // index of the round in progress; -1 while initialization traffic runs
  int round() const { return static_cast<int>(rounds_.size()) - 1; }

  void begin_round();

  // broadcast node `from`'s value under `tag`: one message per neighbor is
  // logged and the value becomes fetchable by the closed neighborhood
  void publish(int from, PayloadTag tag, const Vec& value);

  // read `owner`'s latest value under `tag` on behalf of `reader`; owners may
  // read themselves, any other non-neighbor access raises the audit error
  const Vec& fetch(int reader, int owner, PayloadTag tag) const;

  const RoundLog& init_log() const { return init_; }
  const std::vector<RoundLog>& rounds() const { return rounds_; }

  long message_count(bool include_init = false) const;
  long count_with_tag(PayloadTag tag, bool include_init = false) const;
  long bytes_per_message() const { return 8L * d_; }

  // observed d-vectors sent per node per round: round messages normalized by
  // rounds * 2|E| (a full per-neighbor broadcast round is 2|E| messages)
  double observed_cost() const;

  // one row per message: k,node,payload_tag,bytes (k = -1 for init traffic)
  void export_message_log(const std::string& path) const;

 private:
  void check_node(int i, const char* what) const;

  Topology topo_;
  int d_ = 0;
  RoundLog init_;
  std::vector<RoundLog> rounds_;
  // latest value per (node, tag) with a published flag
  std::vector<std::array<Vec, kPayloadTags>> board_;
  std::vector<std::array<bool, kPayloadTags>> present_;
};

}  // namespace amm
