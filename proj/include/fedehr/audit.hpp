#pragma once

// Role-based field visibility, consent-driven policy updates, and the
// hash-chained audit log with its verifier.
//
// Canonical entry serialization (the byte string under entry_hash):
//   for each field in the fixed order
//     index, timestamp, actor_id, action, detail, prev_hash
//   append a 4-byte big-endian length followed by the field bytes, where
//     index      = 8-byte big-endian unsigned
//     timestamp  = 8-byte big-endian two's-complement unix seconds
//     actor_id   = UTF-8 bytes
//     action     = canonical lowercase action name, UTF-8
//     detail     = UTF-8 bytes
//     prev_hash  = 32 raw digest bytes
//   entry_hash = SHA-256(concatenation). Entry 0 has prev_hash = 32 zero
//   bytes. Indices are contiguous from 0.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedehr/dataset.hpp"
#include "fedehr/errors.hpp"
#include "fedehr/sha256.hpp"
#include "fedehr/util.hpp"

namespace fedehr {

// --- roles and policy ------------------------------------------------------------

enum class Role { patient, physician, insurer, pharmacy, admin, verifier };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::patient: return "patient";
    case Role::physician: return "physician";
    case Role::insurer: return "insurer";
    case Role::pharmacy: return "pharmacy";
    case Role::admin: return "admin";
    default: return "verifier";
  }
}

inline std::optional<Role> role_from_string(std::string_view s) {
  if (s == "patient") return Role::patient;
  if (s == "physician") return Role::physician;
  if (s == "insurer") return Role::insurer;
  if (s == "pharmacy") return Role::pharmacy;
  if (s == "admin") return Role::admin;
  if (s == "verifier") return Role::verifier;
  return std::nullopt;
}

enum class Decision { allow, deny };

struct PolicyRule {
  Decision decision = Decision::deny;
  std::vector<std::string> obligations;
};

// (role, field) -> rule, with an implicit default of deny: lookups are total.
class Policy {
 public:
  Decision decide(Role role, const std::string& field) const {
    const auto it = rules_.find({role, field});
    return it == rules_.end() ? Decision::deny : it->second.decision;
  }

  std::vector<std::string> obligations(Role role, const std::string& field) const {
    const auto it = rules_.find({role, field});
    return it == rules_.end() ? std::vector<std::string>{} : it->second.obligations;
  }

  void set_rule(Role role, const std::string& field, Decision decision,
                std::vector<std::string> obligations = {}) {
    rules_[{role, field}] = PolicyRule{decision, std::move(obligations)};
  }

  const std::map<std::pair<Role, std::string>, PolicyRule>& rules() const { return rules_; }

 private:
  std::map<std::pair<Role, std::string>, PolicyRule> rules_;
};

inline const std::vector<std::string>& patient_fields() {
  static const std::vector<std::string> fields{"age",    "sex",    "bmi",     "children",
                                               "smoker", "region", "charges", "ssn"};
  return fields;
}

// The paper fixes two cells of the matrix: the insurer may see SSN and
// charges, the physician may see neither. The rest extends those two
// constraints with least-privilege defaults; every cell can be overridden
// through consent updates.
inline Policy default_policy() {
  Policy p;
  const std::vector<std::string> clinical{"age", "sex", "bmi", "children", "smoker", "region"};
  p.set_rule(Role::insurer, "ssn", Decision::allow);
  p.set_rule(Role::insurer, "charges", Decision::allow);
  for (const auto& f : clinical) p.set_rule(Role::insurer, f, Decision::deny);
  for (const auto& f : clinical) p.set_rule(Role::physician, f, Decision::allow);
  p.set_rule(Role::physician, "ssn", Decision::deny);
  p.set_rule(Role::physician, "charges", Decision::deny);
  p.set_rule(Role::pharmacy, "smoker", Decision::allow);
  for (const auto& f : patient_fields()) p.set_rule(Role::patient, f, Decision::allow);
  // admin and verifier get no record fields; the verifier works on log
  // metadata, the admin on policy bootstrap.
  return p;
}

struct AccessRequest {
  std::string actor_id;
  Role role = Role::patient;
  std::string record_id;
  std::vector<std::string> fields;
  std::string purpose;
  std::int64_t timestamp = 0;
};

struct PolicyDecision {
  bool allowed = false;
  std::vector<std::string> denied_fields;  // empty iff allowed
  std::vector<std::string> obligations;
};

// A request is allowed iff every requested field is individually allowed.
inline PolicyDecision evaluate_policy(const Policy& p, const AccessRequest& req) {
  if (req.fields.empty()) throw Error("access request names no fields");
  PolicyDecision out;
  std::set<std::string> obligations;
  for (const auto& field : req.fields) {
    if (p.decide(req.role, field) == Decision::deny) {
      out.denied_fields.push_back(field);
    } else {
      for (auto& o : p.obligations(req.role, field)) obligations.insert(o);
    }
  }
  out.allowed = out.denied_fields.empty();
  out.obligations.assign(obligations.begin(), obligations.end());
  return out;
}

// Field-name -> rendered value, containing only the allowed fields. Denied
// fields are absent, not blanked.
inline std::map<std::string, std::string> redact_view(const PatientRecord& rec, Role role,
                                                      const Policy& p) {
  std::map<std::string, std::string> view;
  auto put = [&](const std::string& field, const std::string& value) {
    if (p.decide(role, field) == Decision::allow) view[field] = value;
  };
  put("age", std::to_string(rec.age));
  put("sex", to_string(rec.sex));
  put("bmi", format_double(rec.bmi));
  put("children", std::to_string(rec.children));
  put("smoker", to_string(rec.smoker));
  put("region", to_string(rec.region));
  put("charges", format_double(rec.charges));
  put("ssn", rec.ssn);
  return view;
}

struct RuleChange {
  Role role = Role::patient;
  std::string field;
  Decision decision = Decision::deny;
  std::vector<std::string> obligations;
};

// Only the patient (or the admin, for bootstrap) may change rules.
inline Policy consent_update(const Policy& p, Role actor_role, const RuleChange& change) {
  if (actor_role != Role::patient && actor_role != Role::admin)
    throw Unauthorized(std::string(to_string(actor_role)) + " may not modify the policy");
  Policy out = p;
  out.set_rule(change.role, change.field, change.decision, change.obligations);
  return out;
}

// --- policy file (JSON map "role.field" -> rule) -----------------------------------

inline nlohmann::json policy_to_json(const Policy& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, rule] : p.rules()) {
    const std::string name = std::string(to_string(key.first)) + "." + key.second;
    j[name] = {{"decision", rule.decision == Decision::allow ? "allow" : "deny"},
               {"obligations", rule.obligations}};
  }
  return j;
}

inline Policy policy_from_json(const nlohmann::json& j) {
  Policy p;
  for (const auto& [key, value] : j.items()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw Error("policy key '" + key + "' is not role.field");
    const auto role = role_from_string(key.substr(0, dot));
    if (!role) throw Error("unknown role in policy key '" + key + "'");
    const std::string decision_str = value.at("decision").get<std::string>();
    if (decision_str != "allow" && decision_str != "deny")
      throw Error("bad decision '" + decision_str + "'");
    p.set_rule(*role, key.substr(dot + 1),
               decision_str == "allow" ? Decision::allow : Decision::deny,
               value.value("obligations", std::vector<std::string>{}));
  }
  return p;
}

// --- hash-chained log ---------------------------------------------------------------

enum class LogAction { access_granted, access_denied, policy_changed, data_exported };

inline const char* to_string(LogAction a) {
  switch (a) {
    case LogAction::access_granted: return "access_granted";
    case LogAction::access_denied: return "access_denied";
    case LogAction::policy_changed: return "policy_changed";
    default: return "data_exported";
  }
}

inline std::optional<LogAction> log_action_from_string(std::string_view s) {
  if (s == "access_granted") return LogAction::access_granted;
  if (s == "access_denied") return LogAction::access_denied;
  if (s == "policy_changed") return LogAction::policy_changed;
  if (s == "data_exported") return LogAction::data_exported;
  return std::nullopt;
}

struct LogEntry {
  std::uint64_t index = 0;
  std::int64_t timestamp = 0;
  std::string actor_id;
  LogAction action = LogAction::access_granted;
  std::string detail;
  Digest32 prev_hash{};
  Digest32 entry_hash{};
};

namespace detail {

inline void append_length_prefixed(std::string& buf, const void* data, std::size_t len) {
  for (int shift = 24; shift >= 0; shift -= 8)
    buf.push_back(static_cast<char>((len >> shift) & 0xff));
  buf.append(static_cast<const char*>(data), len);
}

inline void append_be64(std::string& buf, std::uint64_t v) {
  std::uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  append_length_prefixed(buf, bytes, 8);
}

}  // namespace detail

// The canonical byte string documented at the top of this header.
inline std::string canonical_entry_bytes(const LogEntry& e) {
  std::string buf;
  detail::append_be64(buf, e.index);
  detail::append_be64(buf, static_cast<std::uint64_t>(e.timestamp));
  detail::append_length_prefixed(buf, e.actor_id.data(), e.actor_id.size());
  const std::string action = to_string(e.action);
  detail::append_length_prefixed(buf, action.data(), action.size());
  detail::append_length_prefixed(buf, e.detail.data(), e.detail.size());
  detail::append_length_prefixed(buf, e.prev_hash.data(), e.prev_hash.size());
  return buf;
}

inline Digest32 compute_entry_hash(const LogEntry& e) {
  const std::string bytes = canonical_entry_bytes(e);
  return sha256(bytes.data(), bytes.size());
}

class LogChain {
 public:
  LogChain() = default;
  explicit LogChain(std::vector<LogEntry> entries) : entries_(std::move(entries)) {}

  const std::vector<LogEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Appends with the correct index, link, and hash; append-only by
  // construction. Timestamps need not be monotonic; ordering is by index.
  const LogEntry& append(std::int64_t timestamp, const std::string& actor_id, LogAction action,
                         const std::string& detail) {
    LogEntry e;
    e.index = entries_.size();
    e.timestamp = timestamp;
    e.actor_id = actor_id;
    e.action = action;
    e.detail = detail;
    e.prev_hash = entries_.empty() ? Digest32{} : entries_.back().entry_hash;
    e.entry_hash = compute_entry_hash(e);
    entries_.push_back(std::move(e));
    return entries_.back();
  }

 private:
  std::vector<LogEntry> entries_;
};

struct ChainViolation {
  std::size_t index = 0;
  std::string reason;
};

// Recomputes every hash and link; reports the first discrepancy.
inline std::optional<ChainViolation> verify_chain(const LogChain& chain) {
  Digest32 expected_prev{};  // genesis: 32 zero bytes
  for (std::size_t i = 0; i < chain.entries().size(); ++i) {
    const LogEntry& e = chain.entries()[i];
    if (e.index != i) return ChainViolation{i, "index gap: entry claims " + std::to_string(e.index)};
    if (e.prev_hash != expected_prev) return ChainViolation{i, "broken link to previous entry"};
    if (compute_entry_hash(e) != e.entry_hash) return ChainViolation{i, "hash mismatch"};
    expected_prev = e.entry_hash;
  }
  return std::nullopt;
}

// --- chain file (JSON lines) ----------------------------------------------------------

inline std::string chain_to_jsonl(const LogChain& chain) {
  std::ostringstream out;
  for (const auto& e : chain.entries()) {
    nlohmann::json j{{"index", e.index},          {"timestamp", e.timestamp},
                     {"actor_id", e.actor_id},    {"action", to_string(e.action)},
                     {"detail", e.detail},        {"prev_hash", hex_encode(e.prev_hash)},
                     {"entry_hash", hex_encode(e.entry_hash)}};
    out << j.dump() << '\n';
  }
  return out.str();
}

inline LogChain chain_from_jsonl(std::istream& in) {
  std::vector<LogEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    LogEntry e;
    e.index = j.at("index").get<std::uint64_t>();
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    e.actor_id = j.at("actor_id").get<std::string>();
    const auto action = log_action_from_string(j.at("action").get<std::string>());
    if (!action) throw Error("unknown log action in chain file");
    e.action = *action;
    e.detail = j.at("detail").get<std::string>();
    e.prev_hash = digest_from_hex(j.at("prev_hash").get<std::string>());
    e.entry_hash = digest_from_hex(j.at("entry_hash").get<std::string>());
    entries.push_back(std::move(e));
  }
  return LogChain(std::move(entries));
}

// --- replay check ------------------------------------------------------------------

// Detail payloads written by the CLI are JSON: access entries carry
// {"role", "fields", "record"}, policy changes carry
// {"role", "field", "decision"}. Starting from the base policy, replays
// every policy change and re-evaluates every logged access decision.
inline std::optional<ChainViolation> verify_policy_replay(const LogChain& chain, Policy policy) {
  for (std::size_t i = 0; i < chain.entries().size(); ++i) {
    const LogEntry& e = chain.entries()[i];
    nlohmann::json detail;
    try {
      detail = nlohmann::json::parse(e.detail);
    } catch (const nlohmann::json::exception&) {
      continue;  // free-form detail; nothing to replay
    }
    if (e.action == LogAction::policy_changed) {
      const auto role = role_from_string(detail.value("role", ""));
      if (!role) return ChainViolation{i, "policy_changed entry with unknown role"};
      policy.set_rule(*role, detail.at("field").get<std::string>(),
                      detail.at("decision").get<std::string>() == "allow" ? Decision::allow
                                                                          : Decision::deny);
      continue;
    }
    if (e.action != LogAction::access_granted && e.action != LogAction::access_denied) continue;
    const auto role = role_from_string(detail.value("role", ""));
    if (!role) return ChainViolation{i, "access entry with unknown role"};
    AccessRequest req;
    req.role = *role;
    req.fields = detail.at("fields").get<std::vector<std::string>>();
    req.actor_id = e.actor_id;
    req.timestamp = e.timestamp;
    const PolicyDecision decision = evaluate_policy(policy, req);
    const bool logged_allow = e.action == LogAction::access_granted;
    if (decision.allowed != logged_allow)
      return ChainViolation{i, "logged decision does not replay from the policy history"};
  }
  return std::nullopt;
}

}  // namespace fedehr
