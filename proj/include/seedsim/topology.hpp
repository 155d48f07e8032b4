#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "seedsim/common.hpp"

namespace seedsim {

struct ScenarioParams {
  double width_m = 1299.0;
  double height_m = 750.0;
  double lane_width_m = 3.5;
  int lanes_per_direction = 4;
  int num_directions = 4;
  double speed_kmh = 60.0;
  int platoon_size = 5;
  double platoon_gap_m = 2.5;
  double vehicle_length_m = 5.0;
  // Vehicles are placed on the two roads crossing at the scenario centre,
  // within this along-lane distance of the central intersection.
  double placement_radius_m = 250.0;
  Vec2 bs_pos{649.5, 375.0};
  Vec2 eavesdropper_pos{661.5, 387.0};

  double speed_mps() const { return speed_kmh / 3.6; }
  // Centre-to-centre distance between consecutive vehicles in a lane.
  double spacing_m() const { return vehicle_length_m + platoon_gap_m; }
};

struct Lane {
  Vec2 origin;   // entry point
  Vec2 heading;  // unit vector
  double length = 0.0;
  bool central = false;  // lies on one of the two roads through the centre

  Vec2 at(double s) const { return origin + s * heading; }
};

struct Rect {
  double x0, y0, x1, y1;
};

// Manhattan grid: three horizontal and three vertical roads splitting the area
// into 433 m x 250 m blocks, each road carrying lanes_per_direction lanes in
// both directions.
struct Geometry {
  std::vector<Lane> lanes;
  std::vector<Rect> blocks;
  Vec2 centre;

  static Geometry build(const ScenarioParams& p) {
    if (p.num_directions != 4)
      throw Fault("geometry: only the four-direction crossroad grid is supported");
    if (p.lanes_per_direction <= 0 || p.lane_width_m <= 0.0)
      throw Fault("geometry: lane count and width must be positive");
    Geometry g;
    g.centre = {p.width_m / 2.0, p.height_m / 2.0};
    const double half_road = p.lanes_per_direction * p.lane_width_m;
    std::vector<double> xs, ys;
    for (int k = 0; k < 3; ++k) {
      xs.push_back(p.width_m * (2 * k + 1) / 6.0);
      ys.push_back(p.height_m * (2 * k + 1) / 6.0);
    }
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < p.lanes_per_direction; ++k) {
        const double off = p.lane_width_m * (k + 0.5);
        const bool central = r == 1;
        g.lanes.push_back({{0.0, ys[r] - off}, {1.0, 0.0}, p.width_m, central});
        g.lanes.push_back({{p.width_m, ys[r] + off}, {-1.0, 0.0}, p.width_m, central});
        g.lanes.push_back({{xs[r] + off, 0.0}, {0.0, 1.0}, p.height_m, central});
        g.lanes.push_back({{xs[r] - off, p.height_m}, {0.0, -1.0}, p.height_m, central});
      }
    }
    std::vector<double> bx{0.0}, by{0.0};
    for (double x : xs) {
      bx.push_back(x - half_road);
      bx.push_back(x + half_road);
    }
    for (double y : ys) {
      by.push_back(y - half_road);
      by.push_back(y + half_road);
    }
    bx.push_back(p.width_m);
    by.push_back(p.height_m);
    for (std::size_t i = 0; i + 1 < bx.size(); i += 2)
      for (std::size_t j = 0; j + 1 < by.size(); j += 2)
        g.blocks.push_back({bx[i], by[j], bx[i + 1], by[j + 1]});
    return g;
  }

  // Along-lane coordinate of the point on `lane` closest to the centre.
  double centre_coordinate(const Lane& lane) const {
    const Vec2 d = centre - lane.origin;
    return d.x * lane.heading.x + d.y * lane.heading.y;
  }

  // True iff the open segment a-b passes through the interior of a block.
  bool line_of_sight(Vec2 a, Vec2 b) const {
    for (const Rect& r : blocks)
      if (segment_crosses(a, b, r)) return false;
    return true;
  }

  static bool segment_crosses(Vec2 a, Vec2 b, const Rect& r) {
    // Liang-Barsky clipping against the rectangle.
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - r.x0, r.x1 - a.x, a.y - r.y0, r.y1 - a.y};
    for (int i = 0; i < 4; ++i) {
      if (p[i] == 0.0) {
        if (q[i] <= 0.0) return false;
        continue;
      }
      const double t = q[i] / p[i];
      if (p[i] < 0.0)
        t0 = std::max(t0, t);
      else
        t1 = std::min(t1, t);
      if (t0 >= t1) return false;
    }
    return t1 - t0 > 1e-12;
  }
};

enum class Role { PlatoonLeader, PlatoonMember, Free };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::PlatoonLeader: return "leader";
    case Role::PlatoonMember: return "member";
    case Role::Free: return "free";
  }
  return "?";
}

struct Vehicle {
  int id = 0;
  int lane = 0;
  double s = 0.0;  // along-lane coordinate
  Vec2 position;
  Vec2 heading;
  double speed_mps = 0.0;
  Role role = Role::Free;
  std::optional<int> platoon_id;
};

struct V2VLink {
  int tx = 0;
  int rx = 0;
};

struct Topology {
  Geometry geometry;
  std::vector<Vehicle> vehicles;
  std::vector<std::vector<int>> platoons;  // leader first, then members front to back
  Vec2 eavesdropper_pos;
  Vec2 bs_pos;
  std::vector<V2VLink> v2v_links;
  std::vector<int> v2i_links;  // transmitter vehicle per subchannel

  std::size_t num_v2v() const { return v2v_links.size(); }
  std::size_t num_v2i() const { return v2i_links.size(); }
  Role link_role(std::size_t m) const { return vehicles.at(v2v_links.at(m).tx).role; }
};

namespace detail {

inline bool lane_slot_free(const std::vector<Vehicle>& placed, int lane, double lo,
                           double hi, double spacing) {
  for (const Vehicle& v : placed)
    if (v.lane == lane && v.s > lo - spacing && v.s < hi + spacing) return false;
  return true;
}

}  // namespace detail

// Places `num_platoons` platoons and `num_free` free vehicles on the lanes of
// the two central roads. Links are not derived here; call derive_links.
inline Topology generate_groups(int num_platoons, int num_free, Rng& rng,
                                const ScenarioParams& p) {
  if (num_platoons < 0 || num_free < 0 || num_platoons + num_free == 0)
    throw Fault("generate_topology: need at least one vehicle");
  if (p.platoon_size < 2) throw Fault("generate_topology: platoon size must be >= 2");
  const int num_vehicles = num_platoons * p.platoon_size + num_free;
  Topology topo;
  topo.geometry = Geometry::build(p);
  topo.bs_pos = p.bs_pos;
  topo.eavesdropper_pos = p.eavesdropper_pos;

  std::vector<int> lanes;
  for (std::size_t i = 0; i < topo.geometry.lanes.size(); ++i)
    if (topo.geometry.lanes[i].central) lanes.push_back(static_cast<int>(i));

  const double spacing = p.spacing_m();
  const double window = 2.0 * p.placement_radius_m;
  const double capacity =
      lanes.size() * std::floor((window + spacing) / spacing);
  if (num_vehicles > capacity) {
    std::ostringstream os;
    os << "generate_topology: " << num_vehicles << " vehicles exceed lane capacity "
       << capacity << " (" << lanes.size() << " lanes, placement window " << window
       << " m, spacing " << spacing << " m)";
    throw Fault(os.str());
  }

  auto place_group = [&](int size, Role head_role, std::optional<int> platoon) {
    const double span = (size - 1) * spacing;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const int lane = lanes[rng.below(lanes.size())];
      const Lane& L = topo.geometry.lanes[lane];
      const double c = topo.geometry.centre_coordinate(L);
      const double lo = std::max(0.0, c - p.placement_radius_m + span);
      const double hi = std::min(L.length, c + p.placement_radius_m);
      if (hi < lo) continue;
      const double head = rng.uniform(lo, hi);
      if (!detail::lane_slot_free(topo.vehicles, lane, head - span, head, spacing))
        continue;
      std::vector<int> ids;
      for (int k = 0; k < size; ++k) {
        Vehicle v;
        v.id = static_cast<int>(topo.vehicles.size());
        v.lane = lane;
        v.s = head - k * spacing;
        v.position = L.at(v.s);
        v.heading = L.heading;
        v.speed_mps = p.speed_mps();
        v.role = k == 0 ? head_role : Role::PlatoonMember;
        v.platoon_id = platoon;
        ids.push_back(v.id);
        topo.vehicles.push_back(v);
      }
      return ids;
    }
    std::ostringstream os;
    os << "generate_topology: could not place group of " << size << " after "
       << topo.vehicles.size() << " vehicles; lanes are saturated";
    throw Fault(os.str());
  };

  for (int k = 0; k < num_platoons; ++k)
    topo.platoons.push_back(place_group(p.platoon_size, Role::PlatoonLeader, k));
  for (int k = 0; k < num_free; ++k) place_group(1, Role::Free, std::nullopt);
  return topo;
}

// floor(num_vehicles / platoon_size) platoons; the remainder drive alone.
inline Topology generate_topology(int num_vehicles, Rng& rng, const ScenarioParams& p) {
  if (num_vehicles <= 0) throw Fault("generate_topology: need at least one vehicle");
  if (p.platoon_size < 2) throw Fault("generate_topology: platoon size must be >= 2");
  return generate_groups(num_vehicles / p.platoon_size, num_vehicles % p.platoon_size, rng, p);
}

// V2V: within a platoon the leader sends to the first member, each member sends
// to the one behind it and the last member sends back to its predecessor. Free
// vehicles send to their nearest neighbour. V2I: the num_subchannels leaders and
// free vehicles nearest the BS; when there are fewer of those than subchannels
// the remainder is filled with the platoon members nearest the BS.
inline Topology derive_links(Topology topo, int num_subchannels) {
  if (num_subchannels <= 0) throw Fault("derive_links: num_subchannels must be positive");
  topo.v2v_links.clear();
  topo.v2i_links.clear();
  for (const auto& platoon : topo.platoons) {
    const std::size_t n = platoon.size();
    for (std::size_t k = 0; k < n; ++k) {
      const int rx = k + 1 < n ? platoon[k + 1] : platoon[k - 1];
      topo.v2v_links.push_back({platoon[k], rx});
    }
  }
  for (const Vehicle& v : topo.vehicles) {
    if (v.role != Role::Free) continue;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const Vehicle& u : topo.vehicles) {
      if (u.id == v.id) continue;
      const double d = distance(v.position, u.position);
      if (d < best_d) {
        best_d = d;
        best = u.id;
      }
    }
    if (best < 0) throw Fault("derive_links: free vehicle has no neighbour to talk to");
    topo.v2v_links.push_back({v.id, best});
  }

  auto by_bs_distance = [&](std::vector<int>& ids) {
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      return distance(topo.vehicles[a].position, topo.bs_pos) <
             distance(topo.vehicles[b].position, topo.bs_pos);
    });
  };
  std::vector<int> primary, fallback;
  for (const Vehicle& v : topo.vehicles)
    (v.role == Role::PlatoonMember ? fallback : primary).push_back(v.id);
  by_bs_distance(primary);
  by_bs_distance(fallback);
  primary.insert(primary.end(), fallback.begin(), fallback.end());
  if (primary.size() < static_cast<std::size_t>(num_subchannels)) {
    std::ostringstream os;
    os << "derive_links: " << primary.size() << " vehicles cannot serve "
       << num_subchannels << " V2I links";
    throw Fault(os.str());
  }
  topo.v2i_links.assign(primary.begin(), primary.begin() + num_subchannels);
  return topo;
}

// Moves every vehicle speed*dt along its lane; vehicles running off the end
// re-enter at the start of the same lane.
inline Topology advance(Topology topo, double dt) {
  if (!(dt > 0.0)) throw Fault("advance: dt must be positive");
  for (Vehicle& v : topo.vehicles) {
    const Lane& L = topo.geometry.lanes.at(v.lane);
    v.s = std::fmod(v.s + v.speed_mps * dt, L.length);
    if (v.s < 0.0) v.s += L.length;
    v.position = L.at(v.s);
  }
  return topo;
}

}  // namespace seedsim
