#pragma once

#include "autotaxi/geometry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace autotaxi {

using AircraftId = std::string;

/// Scheduled or estimated presence window of one aircraft in a conflict zone.
struct IntersectionSlot {
  AircraftId aircraft_id;
  double t_in = 0.0;
  double t_out = 0.0;

  double duration() const { return t_out - t_in; }
  friend bool operator==(const IntersectionSlot&, const IntersectionSlot&) = default;
};

/// Disk-shaped shared taxiway region.
struct ConflictZone {
  std::string id;
  Vec2 center = Vec2::Zero();
  double radius = 1.0;

  friend bool operator==(const ConflictZone& a, const ConflictZone& b) {
    return a.id == b.id && a.center == b.center && a.radius == b.radius;
  }
};

using UnorderedPair = std::pair<AircraftId, AircraftId>;  // first < second

struct ConflictGraph {
  std::set<AircraftId> vertices;
  std::set<UnorderedPair> edges;

  bool adjacent(const AircraftId& a, const AircraftId& b) const;
};

struct DirectedEdge {
  AircraftId from;
  AircraftId to;
  friend auto operator<=>(const DirectedEdge&, const DirectedEdge&) = default;
};

struct PriorityGraph {
  std::set<AircraftId> vertices;
  std::set<DirectedEdge> edges;
  std::set<UnorderedPair> double_edges;
};

enum class EdgeTag { kPriority, kTemporal, kTieBreak };

struct TaggedEdge {
  AircraftId from;
  AircraftId to;
  EdgeTag tag = EdgeTag::kTemporal;
  /// True when the endpoints do not conflict in the zone; only these edges
  /// may be reversed by cycle repair.
  bool disjoint = false;
};

/// Tournament over the zone's aircraft: exactly one directed edge per pair.
struct TemporalAdvantageGraph {
  std::vector<AircraftId> vertices;  // sorted
  std::vector<TaggedEdge> edges;
  /// Number of disjoint-pair edges reversed to break cycles.
  int repaired_edges = 0;
  /// Arrival rank used for ordering (0 = first), ties already broken.
  std::map<AircraftId, int> arrival_rank;

  /// Index of the edge joining a and b (either direction), or -1.
  int find(const AircraftId& a, const AircraftId& b) const;
  bool is_acyclic() const;
};

struct PassingOrder {
  std::vector<AircraftId> sequence;
  friend bool operator==(const PassingOrder&, const PassingOrder&) = default;
};

/// How consecutive entries are spaced by assign_timeslots.
enum class SlotGapMode {
  kEntryToEntry,  ///< T_in[i] >= T_in[i-1] + dt_safe
  kExitToEntry,   ///< T_in[i] >= T_out[i-1] + dt_safe
};

/// Entry/exit ETA of a route through a zone at constant speed. Returns no
/// slot when the route misses the zone.
std::optional<IntersectionSlot> estimate_initial_slots(const AircraftId& id,
                                                       std::span<const Vec2> route,
                                                       double operating_speed,
                                                       const ConflictZone& zone, double t_start);

ConflictGraph build_conflict_graph(std::span<const IntersectionSlot> slots);

PriorityGraph build_priority_graph(const ConflictGraph& g,
                                   const std::map<AircraftId, int>& priorities);

/// Seeded random tie-break rank for each id (a permutation of 0..n-1).
std::map<AircraftId, int> tie_break_ranks(std::span<const AircraftId> ids, std::uint64_t seed);

TemporalAdvantageGraph build_temporal_advantage_graph(const PriorityGraph& p,
                                                      std::span<const IntersectionSlot> slots,
                                                      std::uint64_t rng_seed);

/// Longest walk from `start` through an acyclic tournament. Throws if the
/// graph is cyclic or the walk does not cover every vertex.
PassingOrder longest_walk(const TemporalAdvantageGraph& t, const AircraftId& start);

std::vector<IntersectionSlot> assign_timeslots(const PassingOrder& order,
                                               std::span<const IntersectionSlot> initial,
                                               double dt_safe,
                                               SlotGapMode mode = SlotGapMode::kEntryToEntry);

struct IntersectionResolution {
  PassingOrder order;
  std::vector<IntersectionSlot> slots;  ///< in passing order
  TemporalAdvantageGraph graph;
};

IntersectionResolution resolve_intersection(std::span<const IntersectionSlot> slots,
                                            const std::map<AircraftId, int>& priorities,
                                            double dt_safe, std::uint64_t rng_seed,
                                            SlotGapMode mode = SlotGapMode::kEntryToEntry);

}  // namespace autotaxi
