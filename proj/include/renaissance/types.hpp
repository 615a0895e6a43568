#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace renaissance {

// Controllers occupy 1..n_C, switches n_C+1..n_C+n_S. Zero is the "bottom"
// value used for wildcard or absent node fields.
using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0;

// In-port match values. Any real neighbor id matches only that port.
inline constexpr NodeId kAnyPort = 0;
inline constexpr NodeId kLocalPort = 0xFFFFFFFFu;

struct Tag {
  NodeId owner = kNoNode;
  std::uint64_t epoch = 0;

  auto operator<=>(const Tag&) const = default;
};

std::string to_string(const Tag& t);

struct Rule {
  NodeId creator = kNoNode;
  NodeId sw = kNoNode;
  NodeId src = kNoNode;
  NodeId dest = kNoNode;
  NodeId in_port = kAnyPort;
  int priority = 0;
  NodeId fwd = kNoNode;
  Tag tag;
  std::uint64_t stamp = 0;

  bool is_meta() const {
    return src == kNoNode && dest == kNoNode && fwd == kNoNode && priority == 0;
  }

  // Match/action identity, ignoring tag and freshness stamp.
  bool same_content(const Rule& o) const {
    return creator == o.creator && sw == o.sw && src == o.src &&
           dest == o.dest && in_port == o.in_port && priority == o.priority &&
           fwd == o.fwd;
  }

  auto operator<=>(const Rule&) const = default;
};

Rule make_meta_rule(NodeId creator, NodeId sw, const Tag& tag);

std::string to_string(const Rule& r);

// Sorts by (creator, sw, src, dest, in_port, priority, fwd, tag, stamp).
void canonicalize(std::vector<Rule>& rules);

namespace cmd {
struct NewRound {
  Tag tag;
  bool operator==(const NewRound&) const = default;
};
struct DelMngr {
  NodeId controller = kNoNode;
  bool operator==(const DelMngr&) const = default;
};
struct AddMngr {
  NodeId controller = kNoNode;
  bool operator==(const AddMngr&) const = default;
};
struct DelAllRules {
  NodeId controller = kNoNode;
  bool operator==(const DelAllRules&) const = default;
};
// Replaces all of the sender's non-meta rules. When keep is set (three-tag
// mode), the sender's rules carrying that tag survive unless the new set
// already holds a rule with identical content.
struct UpdateRules {
  std::vector<Rule> rules;
  std::optional<Tag> keep;
  bool operator==(const UpdateRules&) const = default;
};
struct Query {
  Tag tag;
  bool operator==(const Query&) const = default;
};
}  // namespace cmd

using Command = std::variant<cmd::NewRound, cmd::DelMngr, cmd::AddMngr,
                             cmd::DelAllRules, cmd::UpdateRules, cmd::Query>;
using CommandBatch = std::vector<Command>;

// A batch is well formed when it starts with NewRound and ends with Query.
bool well_formed(const CommandBatch& batch);

struct QueryReply {
  NodeId id = kNoNode;
  std::vector<NodeId> neighbors;
  // nullopt is the bottom marker used by controller replies.
  std::optional<std::vector<NodeId>> managers;
  std::vector<Rule> rules;

  bool operator==(const QueryReply&) const = default;
};

QueryReply self_record(NodeId id, std::vector<NodeId> neighbors);

}  // namespace renaissance
