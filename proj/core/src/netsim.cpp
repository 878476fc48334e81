#include "amm/netsim.hpp"

#include <fstream>

namespace amm {

const char* payload_name(PayloadTag tag) {
  switch (tag) {
    case PayloadTag::x:
      return "x";
    case PayloadTag::z_tilde:
      return "z_tilde";
    case PayloadTag::w:
      return "w";
    case PayloadTag::z:
      return "z";
  }
  return "?";
}

NetSim::NetSim(Topology topo, int d) : topo_(std::move(topo)), d_(d) {
  if (d_ <= 0) throw AmmError("netsim: block dimension must be positive");
  init_.round = -1;
  board_.resize(topo_.nodes());
  present_.resize(topo_.nodes());
  for (auto& p : present_) p.fill(false);
}

void NetSim::check_node(int i, const char* what) const {
  if (i < 0 || i >= topo_.nodes())
    throw AmmError(std::string("netsim: ") + what + " index " + std::to_string(i + 1) +
                   " outside 1.." + std::to_string(topo_.nodes()));
}

void NetSim::begin_round() {
  RoundLog log;
  log.round = static_cast<int>(rounds_.size());
  rounds_.push_back(std::move(log));
}

void NetSim::publish(int from, PayloadTag tag, const Vec& value) {
  check_node(from, "publisher");
  if (value.size() != d_)
    throw AmmError("netsim: payload from node " + std::to_string(from + 1) + " has size " +
                   std::to_string(value.size()) + ", expected " + std::to_string(d_));
  RoundLog& log = rounds_.empty() ? init_ : rounds_.back();
  for (int j : topo_.neighbors(from)) log.messages.push_back({from, j, tag});
  board_[from][static_cast<int>(tag)] = value;
  present_[from][static_cast<int>(tag)] = true;
}

const Vec& NetSim::fetch(int reader, int owner, PayloadTag tag) const {
  check_node(reader, "reader");
  check_node(owner, "owner");
  if (reader != owner && !topo_.is_edge(reader, owner))
    throw AmmError("locality violation: node " + std::to_string(reader + 1) + " read '" +
                   payload_name(tag) + "' of non-neighbor " + std::to_string(owner + 1) +
                   " at round " + std::to_string(round()));
  if (!present_[owner][static_cast<int>(tag)])
    throw AmmError("netsim: node " + std::to_string(owner + 1) + " has not published '" +
                   payload_name(tag) + "'");
  return board_[owner][static_cast<int>(tag)];
}

long NetSim::message_count(bool include_init) const {
  long n = include_init ? static_cast<long>(init_.messages.size()) : 0;
  for (const auto& r : rounds_) n += static_cast<long>(r.messages.size());
  return n;
}

long NetSim::count_with_tag(PayloadTag tag, bool include_init) const {
  auto count = [tag](const RoundLog& log) {
    long n = 0;
    for (const auto& m : log.messages)
      if (m.tag == tag) ++n;
    return n;
  };
  long n = include_init ? count(init_) : 0;
  for (const auto& r : rounds_) n += count(r);
  return n;
}

double NetSim::observed_cost() const {
  if (rounds_.empty() || topo_.edge_count() == 0) return 0.0;
  return static_cast<double>(message_count(false)) /
         (static_cast<double>(rounds_.size()) * 2.0 * topo_.edge_count());
}

void NetSim::export_message_log(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw AmmError("cannot open " + path + " for writing");
  out << "k,node,payload_tag,bytes\n";
  auto dump = [&](const RoundLog& log) {
    for (const auto& m : log.messages)
      out << log.round << ',' << m.from + 1 << ',' << payload_name(m.tag) << ','
          << bytes_per_message() << '\n';
  };
  dump(init_);
  for (const auto& r : rounds_) dump(r);
  if (!out) throw AmmError("failed while writing " + path);
}

}  // namespace amm
