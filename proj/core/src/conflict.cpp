#include "autotaxi/conflict.hpp"

#include "autotaxi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace autotaxi {
namespace {

UnorderedPair make_pair_sorted(const AircraftId& a, const AircraftId& b) {
  return a < b ? UnorderedPair{a, b} : UnorderedPair{b, a};
}

const IntersectionSlot& slot_of(std::span<const IntersectionSlot> slots, const AircraftId& id) {
  for (const auto& s : slots) {
    if (s.aircraft_id == id) return s;
  }
  throw InvalidArgument("no slot for aircraft '" + id + "'");
}

void check_slot(const IntersectionSlot& s) {
  if (!std::isfinite(s.t_in) || !std::isfinite(s.t_out) || s.t_in < 0.0 || !(s.t_in < s.t_out)) {
    throw InvalidArgument("invalid slot for aircraft '" + s.aircraft_id + "'");
  }
}

// Vertices sorted by (t_in, tie-break rank); returns id -> position.
std::map<AircraftId, int> arrival_ranks(std::span<const AircraftId> ids,
                                        std::span<const IntersectionSlot> slots,
                                        std::uint64_t seed) {
  const auto tie = tie_break_ranks(ids, seed);
  std::vector<AircraftId> order(ids.begin(), ids.end());
  std::sort(order.begin(), order.end(), [&](const AircraftId& a, const AircraftId& b) {
    const double ta = slot_of(slots, a).t_in;
    const double tb = slot_of(slots, b).t_in;
    if (ta != tb) return ta < tb;
    return tie.at(a) < tie.at(b);
  });
  std::map<AircraftId, int> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
  return rank;
}

// Topological order of the tournament, or empty if cyclic.
std::vector<int> topological_order(const TemporalAdvantageGraph& t) {
  const std::size_t n = t.vertices.size();
  std::map<AircraftId, int> index;
  for (std::size_t i = 0; i < n; ++i) index[t.vertices[i]] = static_cast<int>(i);
  std::vector<std::vector<int>> out(n);
  std::vector<int> indeg(n, 0);
  for (const auto& e : t.edges) {
    out[index.at(e.from)].push_back(index.at(e.to));
    ++indeg[index.at(e.to)];
  }
  std::vector<int> order;
  std::vector<int> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
  }
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int w : out[v]) {
      if (--indeg[w] == 0) ready.push_back(w);
    }
  }
  if (order.size() != n) order.clear();
  return order;
}

}  // namespace

bool ConflictGraph::adjacent(const AircraftId& a, const AircraftId& b) const {
  return edges.contains(make_pair_sorted(a, b));
}

int TemporalAdvantageGraph::find(const AircraftId& a, const AircraftId& b) const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if ((e.from == a && e.to == b) || (e.from == b && e.to == a)) return static_cast<int>(i);
  }
  return -1;
}

bool TemporalAdvantageGraph::is_acyclic() const {
  return vertices.empty() || !topological_order(*this).empty();
}

std::optional<IntersectionSlot> estimate_initial_slots(const AircraftId& id,
                                                       std::span<const Vec2> route,
                                                       double operating_speed,
                                                       const ConflictZone& zone, double t_start) {
  if (route.size() < 2) throw InvalidArgument("estimate_initial_slots: route needs >= 2 waypoints");
  if (!(operating_speed > 0.0)) {
    throw InvalidArgument("estimate_initial_slots: operating_speed must be positive");
  }
  const auto crossing = polyline_disk_crossing(route, zone.center, zone.radius);
  if (!crossing) return std::nullopt;
  return IntersectionSlot{id, t_start + crossing->s_in / operating_speed,
                          t_start + crossing->s_out / operating_speed};
}

ConflictGraph build_conflict_graph(std::span<const IntersectionSlot> slots) {
  ConflictGraph g;
  for (const auto& s : slots) {
    check_slot(s);
    if (!g.vertices.insert(s.aircraft_id).second) {
      throw InvalidArgument("duplicate aircraft id '" + s.aircraft_id + "' in slot list");
    }
  }
  for (const auto& a : slots) {
    for (const auto& b : slots) {
      if (a.aircraft_id == b.aircraft_id) continue;
      // b enters while a is inside
      if (a.t_in < b.t_in && b.t_in <= a.t_out) {
        g.edges.insert(make_pair_sorted(a.aircraft_id, b.aircraft_id));
      }
    }
  }
  return g;
}

PriorityGraph build_priority_graph(const ConflictGraph& g,
                                   const std::map<AircraftId, int>& priorities) {
  PriorityGraph p;
  p.vertices = g.vertices;
  for (const auto& v : g.vertices) {
    if (!priorities.contains(v)) throw InvalidArgument("missing priority for aircraft '" + v + "'");
  }
  for (const auto& [a, b] : g.edges) {
    const int la = priorities.at(a);
    const int lb = priorities.at(b);
    if (la < lb) {
      p.edges.insert({a, b});
    } else if (lb < la) {
      p.edges.insert({b, a});
    } else {
      p.double_edges.insert({a, b});
    }
  }
  return p;
}

std::map<AircraftId, int> tie_break_ranks(std::span<const AircraftId> ids, std::uint64_t seed) {
  std::vector<AircraftId> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  // Fisher-Yates with raw engine output keeps the permutation identical
  // across standard library implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = sorted.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(sorted[i - 1], sorted[j]);
  }
  std::map<AircraftId, int> rank;
  for (std::size_t i = 0; i < sorted.size(); ++i) rank[sorted[i]] = static_cast<int>(i);
  return rank;
}

TemporalAdvantageGraph build_temporal_advantage_graph(const PriorityGraph& p,
                                                      std::span<const IntersectionSlot> slots,
                                                      std::uint64_t rng_seed) {
  TemporalAdvantageGraph t;
  t.vertices.assign(p.vertices.begin(), p.vertices.end());
  t.arrival_rank = arrival_ranks(t.vertices, slots, rng_seed);

  auto arrival_edge = [&](const AircraftId& a, const AircraftId& b, bool disjoint) {
    const bool a_first = t.arrival_rank.at(a) < t.arrival_rank.at(b);
    const bool tied = slot_of(slots, a).t_in == slot_of(slots, b).t_in;
    TaggedEdge e{a_first ? a : b, a_first ? b : a, tied ? EdgeTag::kTieBreak : EdgeTag::kTemporal,
                 disjoint};
    t.edges.push_back(std::move(e));
  };

  for (std::size_t i = 0; i < t.vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < t.vertices.size(); ++j) {
      const auto& a = t.vertices[i];
      const auto& b = t.vertices[j];
      if (p.edges.contains({a, b})) {
        t.edges.push_back({a, b, EdgeTag::kPriority, false});
      } else if (p.edges.contains({b, a})) {
        t.edges.push_back({b, a, EdgeTag::kPriority, false});
      } else if (p.double_edges.contains({a, b})) {
        arrival_edge(a, b, false);
      } else {
        arrival_edge(a, b, true);
      }
    }
  }

  if (t.is_acyclic()) return t;

  // Conflict edges alone are acyclic: they all increase (priority, arrival
  // rank). The greedy order that always releases the earliest-arriving
  // vertex with no pending conflict predecessor therefore exists; disjoint
  // edges that disagree with it are reversed.
  const std::size_t n = t.vertices.size();
  std::vector<bool> placed(n, false);
  std::map<AircraftId, int> position;
  for (std::size_t step = 0; step < n; ++step) {
    int best = -1;
    for (std::size_t v = 0; v < n; ++v) {
      if (placed[v]) continue;
      bool blocked = false;
      for (const auto& e : t.edges) {
        if (!e.disjoint && e.to == t.vertices[v]) {
          const auto it = std::find(t.vertices.begin(), t.vertices.end(), e.from);
          if (!placed[static_cast<std::size_t>(it - t.vertices.begin())]) {
            blocked = true;
            break;
          }
        }
      }
      if (blocked) continue;
      if (best < 0 || t.arrival_rank.at(t.vertices[v]) <
                          t.arrival_rank.at(t.vertices[static_cast<std::size_t>(best)])) {
        best = static_cast<int>(v);
      }
    }
    placed[static_cast<std::size_t>(best)] = true;
    position[t.vertices[static_cast<std::size_t>(best)]] = static_cast<int>(step);
  }
  for (auto& e : t.edges) {
    if (e.disjoint && position.at(e.from) > position.at(e.to)) {
      std::swap(e.from, e.to);
      ++t.repaired_edges;
    }
  }
  return t;
}

PassingOrder longest_walk(const TemporalAdvantageGraph& t, const AircraftId& start) {
  const std::size_t n = t.vertices.size();
  const auto topo = topological_order(t);
  if (n > 0 && topo.empty()) throw InvalidArgument("longest_walk: graph contains a cycle");
  const auto it = std::find(t.vertices.begin(), t.vertices.end(), start);
  if (it == t.vertices.end()) throw InvalidArgument("longest_walk: unknown start '" + start + "'");
  const int s = static_cast<int>(it - t.vertices.begin());

  std::map<AircraftId, int> index;
  for (std::size_t i = 0; i < n; ++i) index[t.vertices[i]] = static_cast<int>(i);
  std::vector<std::vector<int>> out(n);
  for (const auto& e : t.edges) out[index.at(e.from)].push_back(index.at(e.to));

  constexpr int kUnreached = -1;
  std::vector<int> dist(n, kUnreached);
  std::vector<int> parent(n, -1);
  dist[s] = 0;
  for (int v : topo) {
    if (dist[v] == kUnreached) continue;
    for (int w : out[v]) {
      if (dist[v] + 1 > dist[w]) {
        dist[w] = dist[v] + 1;
        parent[w] = v;
      }
    }
  }
  const int end = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
  if (dist[end] + 1 != static_cast<int>(n)) {
    throw InvalidArgument("longest_walk: walk from '" + start + "' does not cover all aircraft");
  }
  PassingOrder order;
  for (int v = end; v >= 0; v = parent[v]) order.sequence.push_back(t.vertices[v]);
  std::reverse(order.sequence.begin(), order.sequence.end());
  return order;
}

std::vector<IntersectionSlot> assign_timeslots(const PassingOrder& order,
                                               std::span<const IntersectionSlot> initial,
                                               double dt_safe, SlotGapMode mode) {
  if (!(dt_safe > 0.0)) throw InvalidArgument("assign_timeslots: dt_safe must be positive");
  if (order.sequence.size() != initial.size()) {
    throw InvalidArgument("assign_timeslots: order does not cover every slotted aircraft");
  }
  std::vector<IntersectionSlot> out;
  out.reserve(order.sequence.size());
  for (const auto& id : order.sequence) {
    const IntersectionSlot& est = slot_of(initial, id);
    IntersectionSlot s = est;
    if (!out.empty()) {
      const double anchor = mode == SlotGapMode::kEntryToEntry ? out.back().t_in : out.back().t_out;
      s.t_in = std::max(est.t_in, anchor + dt_safe);
      s.t_out = s.t_in + est.duration();
    }
    out.push_back(s);
  }
  return out;
}

IntersectionResolution resolve_intersection(std::span<const IntersectionSlot> slots,
                                            const std::map<AircraftId, int>& priorities,
                                            double dt_safe, std::uint64_t rng_seed,
                                            SlotGapMode mode) {
  IntersectionResolution r;
  if (slots.empty()) return r;
  const auto conflict = build_conflict_graph(slots);
  const auto priority = build_priority_graph(conflict, priorities);
  r.graph = build_temporal_advantage_graph(priority, slots, rng_seed);

  // The walk starts at the tournament's source: the first arriver unless a
  // conflicting aircraft outranks it.
  std::map<AircraftId, int> indeg;
  for (const auto& v : r.graph.vertices) indeg[v] = 0;
  for (const auto& e : r.graph.edges) ++indeg[e.to];
  AircraftId start = r.graph.vertices.front();
  for (const auto& [v, d] : indeg) {
    if (d == 0) start = v;
  }
  r.order = longest_walk(r.graph, start);
  r.slots = assign_timeslots(r.order, slots, dt_safe, mode);
  return r;
}

}  // namespace autotaxi
