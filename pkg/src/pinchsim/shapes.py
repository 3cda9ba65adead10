"""Rigid object geometry and fingertip-surface contact queries.

Objects are convex polyhedra (faces stored with inward body-frame normals and
tangent axes) or spheres.  A contact query finds the closest object-surface
point to a spherical fingertip and returns the contact frame used by the
constraint and controller layers.
"""

import math
from dataclasses import dataclass

import numpy as np

from .contact import ContactFrame
from .errors import QueryAmbiguous
from .spatial import normalize, quat_identity, quat_to_matrix

# Tangent gauge: reference axis for building t_x = normalize(a_ref x n_z).
_GAUGE_PRIMARY = np.array([0.0, 0.0, 1.0])
_GAUGE_FALLBACK = np.array([1.0, 0.0, 0.0])


def tangent_gauge(n_z):
    """Right-handed tangents for a unit normal from the world-z gauge."""
    a = np.cross(_GAUGE_PRIMARY, n_z)
    if np.linalg.norm(a) < 1e-6:
        a = np.cross(_GAUGE_FALLBACK, n_z)
    t_x = normalize(a)
    t_y = np.cross(n_z, t_x)
    return t_x, t_y


@dataclass
class Face:
    """One polyhedron face: inward unit normal, plane offset, tangent axes.

    The plane is {x : n_in . x = offset}; the interior satisfies
    n_in . x >= offset.  Stored tangents obey t_x x t_y = outward normal.
    """

    n_in: np.ndarray
    offset: float
    t_x: np.ndarray
    t_y: np.ndarray


@dataclass
class Polyhedron:
    faces: list
    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        for i, f in enumerate(self.faces):
            out = -f.n_in
            if np.linalg.norm(np.cross(f.t_x, f.t_y) - out) > 1e-10:
                raise ValueError(f"face {i} tangents not aligned with outward normal")
        for v in self.vertices:
            for f in self.faces:
                if f.n_in @ v < f.offset - 1e-9:
                    raise ValueError("polyhedron is not convex (vertex outside face)")


@dataclass
class Sphere:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass
class ObjectState:
    """Object pose/twist plus inertial parameters (body-frame inertia)."""

    p_o: np.ndarray
    orientation: np.ndarray  # unit quaternion [w, x, y, z]
    v_o: np.ndarray
    w_o: np.ndarray
    mass: float
    inertia: np.ndarray

    def __post_init__(self):
        self.p_o = np.asarray(self.p_o, dtype=float)
        self.orientation = np.asarray(self.orientation, dtype=float)
        self.v_o = np.asarray(self.v_o, dtype=float)
        self.w_o = np.asarray(self.w_o, dtype=float)
        self.inertia = np.asarray(self.inertia, dtype=float)
        if self.mass <= 0:
            raise ValueError("object mass must be positive")
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
            raise ValueError("object inertia not symmetric")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0):
            raise ValueError("object inertia not positive definite")

    def rotation(self):
        return quat_to_matrix(self.orientation)

    @staticmethod
    def at_rest(p_o, mass, inertia, orientation=None):
        q = quat_identity() if orientation is None else np.asarray(orientation)
        return ObjectState(p_o, q, np.zeros(3), np.zeros(3), mass, inertia)


@dataclass
class ContactQuery:
    gap: float
    frame: ContactFrame


def surface_query(shape, p_o, R_o, tip_center, r, edge_tol=1e-6):
    """Closest-point contact query for a spherical fingertip.

    gap is the signed distance from the tip sphere surface to the object
    surface (0 at touch, > 0 separated).  The returned frame sits at the
    object-surface point with n_z pointing from the fingertip into the object.
    """
    tip_center = np.asarray(tip_center, dtype=float)
    if isinstance(shape, Sphere):
        d = tip_center - p_o
        dist = np.linalg.norm(d)
        if dist < 1e-9:
            raise QueryAmbiguous("tip center coincides with sphere center")
        n_z = -d / dist
        gap = dist - shape.radius - r
        p_c = tip_center + (r + gap) * n_z
        t_x, t_y = tangent_gauge(n_z)
        return ContactQuery(gap, ContactFrame(p_c, t_x, t_y, n_z))

    # polyhedron: work in the body frame
    t_b = R_o.T @ (tip_center - p_o)
    dists = np.array([f.offset - f.n_in @ t_b for f in shape.faces])
    k = int(np.argmax(dists))
    face = shape.faces[k]
    sd = float(dists[k])  # signed distance of the tip center to the surface
    c_b = t_b + sd * face.n_in
    for j, f in enumerate(shape.faces):
        if j != k and f.n_in @ c_b < f.offset - edge_tol:
            raise QueryAmbiguous(
                f"tip closest to an edge/vertex (face {k} projection violates face {j})"
            )
    gap = sd - r
    p_c = p_o + R_o @ c_b
    n_z = R_o @ face.n_in
    # face tangents are stored right-handed about the outward normal; flip one
    # so the contact triad is right-handed about n_z (which points inward)
    t_x = R_o @ face.t_x
    t_y = -(R_o @ face.t_y)
    return ContactQuery(gap, ContactFrame(p_c, t_x, t_y, n_z))


def surface_velocity_frame(object_state, frame):
    """Material velocity of the object's contact point: v_o + w x (p_c - p_o)."""
    return object_state.v_o + np.cross(object_state.w_o, frame.p_c - object_state.p_o)


# ---------------------------------------------------------------------------
# shape constructors and mass properties


def _face_from_plane(n_in, offset):
    t_xc, t_yc = tangent_gauge(n_in)
    # stored tangents must cross to the outward normal
    return Face(np.asarray(n_in, dtype=float), float(offset), t_xc, -t_yc)


def make_cube(side):
    """Axis-aligned cube of the given side length, centered at the body origin."""
    h = side / 2.0
    faces = []
    for axis in range(3):
        for sgn in (1.0, -1.0):
            out = np.zeros(3)
            out[axis] = sgn
            faces.append(_face_from_plane(-out, -h))
    verts = np.array(
        [[sx * h, sy * h, sz * h] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    )
    return Polyhedron(faces, verts)


def _polygon_moments(pts):
    """Area, centroid and centroidal second moments of a ccw 2-D polygon."""
    a = s1 = s2 = syy = szz = syz = 0.0
    n = len(pts)
    for i in range(n):
        y0, z0 = pts[i]
        y1, z1 = pts[(i + 1) % n]
        cr = y0 * z1 - y1 * z0
        a += cr
        s1 += (y0 + y1) * cr
        s2 += (z0 + z1) * cr
        syy += (y0 * y0 + y0 * y1 + y1 * y1) * cr
        szz += (z0 * z0 + z0 * z1 + z1 * z1) * cr
        syz += (y0 * z1 + 2 * y0 * z0 + 2 * y1 * z1 + y1 * z0) * cr
    a *= 0.5
    cy = s1 / (6 * a)
    cz = s2 / (6 * a)
    syy = syy / 12 - a * cy * cy
    szz = szz / 12 - a * cz * cz
    syz = syz / 24 - a * cy * cz
    return a, (cy, cz), syy, szz, syz


def make_trapezoid(height=0.048, small_base=0.0277, angle1_deg=30.0, angle2_deg=15.0, depth=0.048):
    """Trapezoidal prism: profile in the y-z plane, extruded along x.

    The small base sits on top (z = +height/2); the two side faces lean
    outward going down by angle1 (the -y side) and angle2 (the +y side) from
    vertical.  The body frame is centered at the centroid.
    """
    h = height
    w = small_base / 2.0
    yl = -w - h * math.tan(math.radians(angle1_deg))
    yr = w + h * math.tan(math.radians(angle2_deg))
    # ccw in (y, z)
    profile = [(yl, -h / 2), (yr, -h / 2), (w, h / 2), (-w, h / 2)]
    _, (cy, cz), _, _, _ = _polygon_moments(profile)
    profile = [(y - cy, z - cz) for (y, z) in profile]

    faces = []
    n = len(profile)
    for i in range(n):
        y0, z0 = profile[i]
        y1, z1 = profile[(i + 1) % n]
        e = normalize(np.array([y1 - y0, z1 - z0]))
        out = np.array([0.0, e[1], -e[0]])  # in-plane outward normal (ccw polygon)
        n_in = -out
        offset = n_in @ np.array([0.0, y0, z0])
        faces.append(_face_from_plane(n_in, offset))
    for sgn in (1.0, -1.0):
        out = np.array([sgn, 0.0, 0.0])
        faces.append(_face_from_plane(-out, -depth / 2.0))

    verts = np.array(
        [[sx * depth / 2.0, y, z] for sx in (-1, 1) for (y, z) in profile]
    )
    return Polyhedron(faces, verts)


def make_trapezoid_profile_moments(height=0.048, small_base=0.0277, angle1_deg=30.0, angle2_deg=15.0):
    h = height
    w = small_base / 2.0
    yl = -w - h * math.tan(math.radians(angle1_deg))
    yr = w + h * math.tan(math.radians(angle2_deg))
    profile = [(yl, -h / 2), (yr, -h / 2), (w, h / 2), (-w, h / 2)]
    return _polygon_moments(profile)


def cube_inertia(mass, side):
    return (mass * side * side / 6.0) * np.eye(3)


def sphere_inertia(mass, radius):
    return (0.4 * mass * radius * radius) * np.eye(3)


def trapezoid_inertia(mass, height=0.048, small_base=0.0277, angle1_deg=30.0, angle2_deg=15.0, depth=0.048):
    """Uniform-density inertia of the trapezoidal prism about its centroid."""
    a, _, syy, szz, syz = make_trapezoid_profile_moments(height, small_base, angle1_deg, angle2_deg)
    ixx = mass * (syy + szz) / a
    iyy = mass * (szz / a + depth * depth / 12.0)
    izz = mass * (syy / a + depth * depth / 12.0)
    iyz = -mass * syz / a
    return np.array([[ixx, 0.0, 0.0], [0.0, iyy, iyz], [0.0, iyz, izz]])
