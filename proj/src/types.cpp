#include "renaissance/types.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace renaissance {

std::string to_string(const Tag& t) {
  return std::to_string(t.owner) + ":" + std::to_string(t.epoch);
}

Rule make_meta_rule(NodeId creator, NodeId sw, const Tag& tag) {
  Rule r;
  r.creator = creator;
  r.sw = sw;
  r.tag = tag;
  return r;
}

namespace {
std::string node_str(NodeId n) {
  if (n == kNoNode) return "_";
  if (n == kLocalPort) return "L";
  return std::to_string(n);
}
}  // namespace

std::string to_string(const Rule& r) {
  std::ostringstream os;
  os << "<" << r.creator << "," << r.sw << "," << node_str(r.src) << ","
     << node_str(r.dest) << ",in=" << node_str(r.in_port) << ",p"
     << r.priority << "," << node_str(r.fwd) << "," << to_string(r.tag)
     << ">";
  return os.str();
}

void canonicalize(std::vector<Rule>& rules) {
  std::sort(rules.begin(), rules.end());
}

bool well_formed(const CommandBatch& batch) {
  if (batch.size() < 2) return false;
  if (!std::holds_alternative<cmd::NewRound>(batch.front())) return false;
  if (!std::holds_alternative<cmd::Query>(batch.back())) return false;
  for (std::size_t i = 1; i + 1 < batch.size(); ++i) {
    if (std::holds_alternative<cmd::NewRound>(batch[i]) ||
        std::holds_alternative<cmd::Query>(batch[i]))
      return false;
  }
  return true;
}

QueryReply self_record(NodeId id, std::vector<NodeId> neighbors) {
  QueryReply m;
  m.id = id;
  std::sort(neighbors.begin(), neighbors.end());
  m.neighbors = std::move(neighbors);
  m.managers = std::vector<NodeId>{};
  return m;
}

}  // namespace renaissance
