#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "perciso/lattice.hpp"

namespace perciso {

using Vec = std::vector<double>;

struct Frame {
    Vec v;
    std::vector<Vec> basis;
};

// Representative of {v, -v} in the closed upper hemisphere (last nonzero coordinate positive).
bool canonical_orientation(const Vec& v);
Frame chosen_square(const Vec& v);
double frame_distance(const Frame& a, const Frame& b);

enum class BaseShape { Square, Disc };
enum class SuitabilityPolicy { Desk, Literal };

struct CylinderSpec {
    BaseShape shape = BaseShape::Square;
    Vec center;  // before scaling
    Frame frame;
    double half_width = 1.0;
    double height = 1.0;
    double scale = 1.0;
    SuitabilityPolicy policy = SuitabilityPolicy::Desk;
    double min_face_separation = -1.0;  // < 0: policy default

    double face_separation_threshold() const;
    static CylinderSpec anchored(const Vec& v, double r, double half_width = 1.0, double height = 1.0);
};

struct DiscreteCylinder {
    int d = 2;
    std::vector<Coord> vertices;  // sorted
    std::vector<signed char> side;  // +1 / -1 per vertex
    std::vector<std::size_t> hemi_plus, hemi_minus, face_plus, face_minus;
    double face_separation = 0.0;
    bool suitable = false;
    std::string reason;

    std::size_t find(const Coord& x) const;  // vertices.size() when absent
};

DiscreteCylinder discrete_cylinder(const CylinderSpec& spec, bool throw_if_unsuitable = false);

struct CutResult {
    std::int64_t value = 0;
    std::vector<EdgeSlot> witness;  // open edges of the minimal cut
    bool suitable = true;
    std::string reason;
};

CutResult min_open_cut(const Configuration& cfg, const std::vector<std::int64_t>& sources,
                       const std::vector<std::int64_t>& sinks, const std::vector<std::int64_t>& arena);

// Smallest pad-free box centred at the origin that contains the cylinder.
BoxSpec cylinder_box(const CylinderSpec& spec);

CutResult xi_hemi(const Configuration& cfg, const CylinderSpec& spec);
CutResult xi_face(const Configuration& cfg, const CylinderSpec& spec);
CutResult xi_hemi(const Configuration& cfg, const DiscreteCylinder& cyl);
CutResult xi_face(const Configuration& cfg, const DiscreteCylinder& cyl);

// Cylinder edges joining a "+" vertex to a "-" vertex: a cutset of the hemispheres.
std::vector<EdgeSlot> equatorial_cut(const BoxSpec& box, const DiscreteCylinder& cyl);
// Cylinder edges whose midpoint lies within `radius` lattice units of the rim of the base (s = 0).
std::vector<EdgeSlot> equatorial_ring(const BoxSpec& box, const CylinderSpec& spec, const DiscreteCylinder& cyl,
                                      double radius);

std::vector<std::int64_t> to_box_indices(const BoxSpec& box, const DiscreteCylinder& cyl,
                                         const std::vector<std::size_t>& which);

std::string cut_result_json(const BoxSpec& box, const CutResult& res, const CylinderSpec& spec);

}  // namespace perciso
