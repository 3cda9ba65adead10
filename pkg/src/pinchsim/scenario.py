"""Scene configuration, presets, run orchestration, CSV logging.

A scenario is a JSON-serializable description of the whole experiment: object
shape and inertia, two finger chains with initial/target postures, controller
and friction gains, sensor error model, integration settings and an optional
perturbation schedule.  ``run`` executes the closing phase, switches to the
grasping controller at first bilateral contact, and steps the constrained
dynamics until convergence or the configured duration, logging one CSV row
per (decimated) step.
"""

import copy
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from . import kinematics as kin
from .contact import RollingState, relative_angles, rolling_rates
from .controller import (
    ClosingParams,
    ClosingServo,
    ControllerParams,
    GraspPhase,
    PhaseState,
    grasp_torque,
)
from .dynamics import FrictionParams, GraspDynamics, Multipliers, SystemState
from .errors import (
    GraspLost,
    ParseError,
    PenetrationExceeded,
    PinchSimError,
    UnknownScene,
    ValidationError,
)
from .sensor import FrameSensor, SensorErrorModel
from .shapes import (
    ObjectState,
    Sphere,
    cube_inertia,
    make_cube,
    make_trapezoid,
    sphere_inertia,
    surface_query,
    trapezoid_inertia,
)
from .spatial import normalize, quat_identity, quat_to_matrix

PRESETS = ("cube", "trapezoid", "sphere", "cube_fd10", "perturbed_cube")

PENETRATION_TOL = 1e-4     # m; deeper penetration aborts the run
GRASP_LOSS_WINDOW = 0.05   # s of continuously non-positive normal force
PERTURB_WAKE = 10.0        # settled flag clears when maxvel exceeds wake*tol


# ---------------------------------------------------------------------------
# configuration schema


@dataclass
class ScenarioConfig:
    name: str
    dt: float
    duration: float
    settle_hold: float
    seed: int
    log_every: int
    log_path: str
    include_gyroscopic: bool
    shape: dict
    object: dict
    fingers: list
    controller: dict
    closing: dict
    sensor: dict
    friction: dict
    baumgarte: dict
    perturbations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "dt": self.dt,
            "duration": self.duration,
            "settle_hold": self.settle_hold,
            "seed": self.seed,
            "log_every": self.log_every,
            "log_path": self.log_path,
            "include_gyroscopic": self.include_gyroscopic,
            "shape": self.shape,
            "object": self.object,
            "fingers": self.fingers,
            "controller": self.controller,
            "closing": self.closing,
            "sensor": self.sensor,
            "friction": self.friction,
            "baumgarte": self.baumgarte,
            "perturbations": self.perturbations,
        }


def _require(d, key, path, types):
    if key not in d:
        raise ValidationError(f"{path}.{key}" if path else key, "missing required field")
    v = d[key]
    if not isinstance(v, types):
        tn = types[0].__name__ if isinstance(types, tuple) else types.__name__
        raise ValidationError(f"{path}.{key}" if path else key, f"expected {tn}")
    return v


def _number(d, key, path, positive=False, nonneg=False):
    v = _require(d, key, path, (int, float))
    v = float(v)
    fp = f"{path}.{key}" if path else key
    if positive and v <= 0:
        raise ValidationError(fp, "must be positive")
    if nonneg and v < 0:
        raise ValidationError(fp, "must be nonnegative")
    return v


def _vector(d, key, path, n):
    v = _require(d, key, path, list)
    fp = f"{path}.{key}" if path else key
    if len(v) != n or not all(isinstance(x, (int, float)) for x in v):
        raise ValidationError(fp, f"expected a list of {n} numbers")
    return [float(x) for x in v]


def _matrix(d, key, path, rows, cols):
    v = _require(d, key, path, list)
    fp = f"{path}.{key}" if path else key
    if len(v) != rows:
        raise ValidationError(fp, f"expected {rows} rows")
    out = []
    for i, row in enumerate(v):
        if not isinstance(row, list) or len(row) != cols or not all(
            isinstance(x, (int, float)) for x in row
        ):
            raise ValidationError(f"{fp}[{i}]", f"expected a list of {cols} numbers")
        out.append([float(x) for x in row])
    return out


def _no_extras(d, path, allowed):
    for k in d:
        if k not in allowed:
            raise ValidationError(f"{path}.{k}" if path else k, "unknown field")


def _validate_shape(d):
    t = _require(d, "type", "shape", str)
    if t == "cube":
        _no_extras(d, "shape", {"type", "side"})
        _number(d, "side", "shape", positive=True)
    elif t == "sphere":
        _no_extras(d, "shape", {"type", "radius"})
        _number(d, "radius", "shape", positive=True)
    elif t == "trapezoid":
        _no_extras(d, "shape", {"type", "height", "small_base", "angle1_deg", "angle2_deg", "depth"})
        for k in ("height", "small_base", "depth"):
            _number(d, k, "shape", positive=True)
        for k in ("angle1_deg", "angle2_deg"):
            a = _number(d, k, "shape", nonneg=True)
            if a >= 60:
                raise ValidationError(f"shape.{k}", "must be below 60 degrees")
    else:
        raise ValidationError("shape.type", f"unknown shape type {t!r}")


def _validate_finger(d, idx):
    path = f"fingers[{idx}]"
    _no_extras(
        d,
        path,
        {
            "base_pos",
            "base_rot",
            "axes",
            "offsets",
            "link_mass",
            "link_radius",
            "tip_radius",
            "q0",
            "q_target",
        },
    )
    _vector(d, "base_pos", path, 3)
    _matrix(d, "base_rot", path, 3, 3)
    axes = _require(d, "axes", path, list)
    n = len(axes)
    if n < 1:
        raise ValidationError(f"{path}.axes", "needs at least one joint")
    _matrix(d, "axes", path, n, 3)
    _matrix(d, "offsets", path, n, 3)
    _number(d, "link_mass", path, positive=True)
    _number(d, "link_radius", path, positive=True)
    _number(d, "tip_radius", path, positive=True)
    _vector(d, "q0", path, n)
    _vector(d, "q_target", path, n)
    return n


def validate_config(raw):
    """Validate a raw config dict and return a ScenarioConfig.

    Unknown keys anywhere in the tree are rejected; error messages carry the
    dotted path of the offending field.
    """
    if not isinstance(raw, dict):
        raise ValidationError("", "config root must be an object")
    _no_extras(
        raw,
        "",
        {
            "name",
            "dt",
            "duration",
            "settle_hold",
            "seed",
            "log_every",
            "log_path",
            "include_gyroscopic",
            "shape",
            "object",
            "fingers",
            "controller",
            "closing",
            "sensor",
            "friction",
            "baumgarte",
            "perturbations",
        },
    )
    name = _require(raw, "name", "", str)
    dt = _number(raw, "dt", "", positive=True)
    duration = _number(raw, "duration", "", positive=True)
    settle_hold = 0.0
    if "settle_hold" in raw:
        settle_hold = _number(raw, "settle_hold", "", nonneg=True)
    seed = _require(raw, "seed", "", int)
    log_every = raw.get("log_every", 10)
    if not isinstance(log_every, int) or log_every < 1:
        raise ValidationError("log_every", "must be a positive integer")
    log_path = raw.get("log_path", f"{name}.csv")
    if not isinstance(log_path, str):
        raise ValidationError("log_path", "expected str")
    gyro = raw.get("include_gyroscopic", False)
    if not isinstance(gyro, bool):
        raise ValidationError("include_gyroscopic", "expected bool")

    shape = _require(raw, "shape", "", dict)
    _validate_shape(shape)

    obj = _require(raw, "object", "", dict)
    _no_extras(obj, "object", {"mass", "position", "orientation"})
    _number(obj, "mass", "object", positive=True)
    _vector(obj, "position", "object", 3)
    if "orientation" in obj:
        _vector(obj, "orientation", "object", 4)

    fingers = _require(raw, "fingers", "", list)
    if len(fingers) != 2:
        raise ValidationError("fingers", "exactly two fingers required")
    njs = [_validate_finger(f, i) for i, f in enumerate(fingers)]

    ctrl = _require(raw, "controller", "", dict)
    _no_extras(ctrl, "controller", {"f_d", "k_v"})
    _number(ctrl, "f_d", "controller", positive=True)
    kv = _require(ctrl, "k_v", "controller", (int, float, list))
    if isinstance(kv, list):
        if len(kv) != njs[0]:
            raise ValidationError("controller.k_v", f"expected scalar or {njs[0]} gains")
    elif float(kv) <= 0:
        raise ValidationError("controller.k_v", "must be positive")

    closing = raw.get("closing", {})
    if not isinstance(closing, dict):
        raise ValidationError("closing", "expected object")
    _no_extras(closing, "closing", {"kp", "kd", "speed_cap", "slow_gap", "slow_floor", "dwell"})

    sensor = raw.get("sensor", {})
    if not isinstance(sensor, dict):
        raise ValidationError("sensor", "expected object")
    _no_extras(sensor, "sensor", {"bias_axis", "bias_angle_deg", "noise_std_deg", "period"})
    if "bias_axis" in sensor:
        ax = sensor["bias_axis"]
        if not (isinstance(ax, list) and len(ax) == 2 and all(a in ("t_x", "t_y") for a in ax)):
            raise ValidationError("sensor.bias_axis", "expected two of 't_x'/'t_y'")
    for k in ("bias_angle_deg", "noise_std_deg"):
        if k in sensor:
            _vector(sensor, k, "sensor", 2)

    friction = raw.get("friction", {})
    if not isinstance(friction, dict):
        raise ValidationError("friction", "expected object")
    _no_extras(friction, "friction", {"k_s"})
    if "k_s" in friction:
        _number(friction, "k_s", "friction", nonneg=True)

    baum = raw.get("baumgarte", {})
    if not isinstance(baum, dict):
        raise ValidationError("baumgarte", "expected object")
    _no_extras(baum, "baumgarte", {"alpha", "beta"})

    perts = raw.get("perturbations", [])
    if not isinstance(perts, list):
        raise ValidationError("perturbations", "expected list")
    for i, p in enumerate(perts):
        path = f"perturbations[{i}]"
        if not isinstance(p, dict):
            raise ValidationError(path, "expected object")
        _no_extras(p, path, {"time", "finger", "torque"})
        t = _number(p, "time", path, nonneg=True)
        if t > duration:
            raise ValidationError(f"{path}.time", "beyond run duration")
        fidx = _require(p, "finger", path, int)
        if fidx not in (1, 2):
            raise ValidationError(f"{path}.finger", "must be 1 or 2")
        _number(p, "torque", path)

    return ScenarioConfig(
        name=name,
        dt=dt,
        duration=duration,
        settle_hold=settle_hold,
        seed=seed,
        log_every=log_every,
        log_path=log_path,
        include_gyroscopic=gyro,
        shape=copy.deepcopy(shape),
        object=copy.deepcopy(obj),
        fingers=copy.deepcopy(fingers),
        controller=copy.deepcopy(ctrl),
        closing=copy.deepcopy(closing),
        sensor=copy.deepcopy(sensor),
        friction=copy.deepcopy(friction),
        baumgarte=copy.deepcopy(baum),
        perturbations=copy.deepcopy(perts),
    )


def load_config(path):
    """Load and validate a scenario JSON file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return validate_config(raw)


# ---------------------------------------------------------------------------
# building runtime objects from a config


def build_shape(spec):
    t = spec["type"]
    if t == "cube":
        return make_cube(spec["side"])
    if t == "sphere":
        return Sphere(spec["radius"])
    return make_trapezoid(
        spec["height"], spec["small_base"], spec["angle1_deg"], spec["angle2_deg"], spec["depth"]
    )


def shape_inertia(spec, mass):
    t = spec["type"]
    if t == "cube":
        return cube_inertia(mass, spec["side"])
    if t == "sphere":
        return sphere_inertia(mass, spec["radius"])
    return trapezoid_inertia(
        mass, spec["height"], spec["small_base"], spec["angle1_deg"], spec["angle2_deg"],
        spec["depth"],
    )


def _link_inertia(offset, mass, radius):
    """Solid-cylinder inertia about the link COM, axis along the link offset."""
    offset = np.asarray(offset, dtype=float)
    L = np.linalg.norm(offset)
    u = offset / L
    a2 = radius * radius
    perp = mass * (a2 / 4.0 + L * L / 12.0)
    axial = mass * a2 / 2.0
    P = np.outer(u, u)
    return perp * (np.eye(3) - P) + axial * P


def build_chain(fspec):
    offsets = np.asarray(fspec["offsets"], dtype=float)
    n = offsets.shape[0]
    m = fspec["link_mass"]
    rad = fspec["link_radius"]
    return kin.FingerChain(
        base_pos=np.asarray(fspec["base_pos"], dtype=float),
        base_rot=np.asarray(fspec["base_rot"], dtype=float),
        axes=np.asarray([normalize(np.asarray(a, dtype=float)) for a in fspec["axes"]]),
        offsets=offsets,
        masses=np.full(n, m),
        coms=offsets / 2.0,
        inertias=np.stack([_link_inertia(offsets[k], m, rad) for k in range(n)]),
        tip_radius=fspec["tip_radius"],
    )


def build_object(cfg):
    mass = cfg.object["mass"]
    inertia = shape_inertia(cfg.shape, mass)
    orient = cfg.object.get("orientation")
    return ObjectState.at_rest(np.asarray(cfg.object["position"], dtype=float), mass, inertia,
                               orientation=orient)


def build_sensor_model(cfg):
    s = cfg.sensor
    return SensorErrorModel(
        bias_axis=tuple(s.get("bias_axis", ["t_x", "t_x"])),
        bias_angle=tuple(math.radians(a) for a in s.get("bias_angle_deg", [0.0, 0.0])),
        noise_std=tuple(math.radians(a) for a in s.get("noise_std_deg", [0.0, 0.0])),
        period=s.get("period", 0.0),
        seed=cfg.seed,
    )


def build_controller(cfg, n_joints):
    kv = cfg.controller["k_v"]
    K = np.asarray(kv, dtype=float) if isinstance(kv, list) else float(kv) * np.ones(n_joints)
    r = cfg.fingers[0]["tip_radius"]
    return ControllerParams(f_d=cfg.controller["f_d"], K_v=K, r=r)


def build_closing(cfg):
    c = cfg.closing
    targets = tuple(np.asarray(f["q_target"], dtype=float) for f in cfg.fingers)
    return ClosingParams(
        targets=targets,
        kp=c.get("kp", 5.0),
        kd=c.get("kd", 0.2),
        speed_cap=c.get("speed_cap", 0.15),
        slow_gap=c.get("slow_gap", 0.002),
        slow_floor=c.get("slow_floor", 0.15),
        dwell=c.get("dwell", 0.3),
    )


def build_dynamics(cfg, chains):
    k_s = cfg.friction.get("k_s", 0.01)
    return GraspDynamics(
        chains,
        build_shape(cfg.shape),
        FrictionParams.isotropic(k_s),
        baumgarte_alpha=cfg.baumgarte.get("alpha", 20.0),
        baumgarte_beta=cfg.baumgarte.get("beta", 20.0),
        include_gyroscopic=cfg.include_gyroscopic,
    )


# ---------------------------------------------------------------------------
# built-in scenes

_MIRROR = np.diag([1.0, -1.0, 1.0])
_LINK_OFFSETS = [[0.05, 0.0, 0.0], [0.05, 0.0, 0.0], [0.04, 0.0, 0.0], [0.03, 0.0, 0.0]]
_Q0 = [0.0, math.radians(60.0), math.radians(-30.0), math.radians(-30.0)]
_TIP_RADIUS = 0.015
_INITIAL_GAP = 0.005
_TIP_SKEW = 0.0  # m, lateral offset between the two initial contact lines


def _finger_prototypes(pair="mirror"):
    """Symmetric finger pair, bases at the origin, approaching along +/-y.

    Finger 1 reaches in +y (its base must sit at negative y).  With
    pair="mirror" finger 2 is the reflection of finger 1 through the y = 0
    plane, so both tips drift the same way laterally while closing; the
    inter-tip line then stays aligned with the flat faces of box-like
    objects.  With pair="antipodal" finger 2 is finger 1 rotated 180 degrees
    about the z axis through the object center, which keeps the two tips
    exactly antipodal at equal joint angles; on a sphere this pins the
    contacts diametral regardless of lateral tip drift.
    """
    Rz90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    Rz180 = np.diag([-1.0, -1.0, 1.0])
    axes1 = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    f1 = {
        "base_pos": [0.0, 0.0, 0.0],
        "base_rot": Rz90.tolist(),
        "axes": axes1.tolist(),
        "offsets": list(_LINK_OFFSETS),
        "link_mass": 0.05,
        "link_radius": 0.008,
        "tip_radius": _TIP_RADIUS,
        "q0": list(_Q0),
        "q_target": list(_Q0),
    }
    if pair == "antipodal":
        base_rot2 = (Rz180 @ Rz90).tolist()
        axes2 = axes1.tolist()
    else:
        base_rot2 = (_MIRROR @ Rz90 @ _MIRROR).tolist()
        axes2 = (-(axes1 @ _MIRROR)).tolist()
    f2 = {
        "base_pos": [0.0, 0.0, 0.0],
        "base_rot": base_rot2,
        "axes": axes2,
        "offsets": list(_LINK_OFFSETS),
        "link_mass": 0.05,
        "link_radius": 0.008,
        "tip_radius": _TIP_RADIUS,
        "q0": list(_Q0),
        "q_target": list(_Q0),
    }
    return [f1, f2]


def _place_finger(fspec, shape, approach, tip_guess, R_o, gap0=_INITIAL_GAP, iters=25):
    """Translate the finger base so the initial fingertip gap equals gap0.

    approach is the unit direction from the fingertip toward the object.
    Base translation is exact for the tip position, so only the gap needs the
    fixed-point refinement (tilted faces, curved surfaces).
    """
    chain = build_chain(fspec)
    q0 = np.asarray(fspec["q0"], dtype=float)
    tip_rel, _ = kin.forward_kinematics(chain, q0)
    tip_rel = tip_rel - chain.base_pos
    base = np.asarray(tip_guess, dtype=float) - tip_rel
    p_o = np.zeros(3)
    for _ in range(iters):
        tip = base + tip_rel
        gap = surface_query(shape, p_o, R_o, tip, chain.tip_radius).gap
        err = gap - gap0
        if abs(err) < 1e-12:
            break
        base = base + err * approach
    fspec = dict(fspec)
    fspec["base_pos"] = [float(v) for v in base]
    return fspec


def _closing_targets(fspec, shape, R_o, delta=0.35):
    """Pick the joint-2 closing direction that shrinks the fingertip gap."""
    chain = build_chain(fspec)
    q0 = np.asarray(fspec["q0"], dtype=float)

    def gap_at(q):
        tip, _ = kin.forward_kinematics(chain, q)
        return surface_query(shape, np.zeros(3), R_o, tip, chain.tip_radius).gap

    eps = 1e-4
    qp = q0.copy()
    qp[1] += eps
    qm = q0.copy()
    qm[1] -= eps
    sign = 1.0 if gap_at(qp) < gap_at(qm) else -1.0
    target = q0.copy()
    target[1] += sign * delta
    fspec = dict(fspec)
    fspec["q_target"] = [float(v) for v in target]
    return fspec


def _scene_half_extent(spec, R_o):
    """Rough y half-extent of the object at its center, for tip placement."""
    if spec["type"] == "cube":
        return spec["side"] / 2.0
    if spec["type"] == "sphere":
        return spec["radius"]
    shape = build_shape(spec)
    ys = (shape.vertices @ R_o.T)[:, 1]
    return (ys.max() - ys.min()) / 2.0


def _base_scene(name, shape_spec, f_d=4.0, perturbations=None, pair="mirror",
                orientation=None, skew=_TIP_SKEW):
    shape = build_shape(shape_spec)
    R_o = np.eye(3) if orientation is None else quat_to_matrix(np.asarray(orientation))
    half = _scene_half_extent(shape_spec, R_o)
    protos = _finger_prototypes(pair)
    tip_y = half + _TIP_RADIUS + _INITIAL_GAP
    guesses = [
        np.array([skew, -tip_y, 0.0]),
        np.array([-skew, tip_y, 0.0]),
    ]
    approaches = [np.array([0.0, 1.0, 0.0]), np.array([0.0, -1.0, 0.0])]
    f1 = _closing_targets(
        _place_finger(protos[0], shape, approaches[0], guesses[0], R_o), shape, R_o)
    if pair == "antipodal":
        # derive finger 2 from finger 1 so the pair stays bitwise antipodal
        f2 = dict(protos[1])
        b1 = f1["base_pos"]
        f2["base_pos"] = [-b1[0], -b1[1], b1[2]]
        f2["q_target"] = list(f1["q_target"])
    else:
        f2 = _closing_targets(
            _place_finger(protos[1], shape, approaches[1], guesses[1], R_o), shape, R_o)
    fingers = [f1, f2]
    obj = {"mass": 0.0021, "position": [0.0, 0.0, 0.0]}
    if orientation is not None:
        obj["orientation"] = [float(v) for v in orientation]
    raw = {
        "name": name,
        "dt": 1e-4,
        "duration": 5.0,
        "seed": 0,
        "log_every": 10,
        "log_path": f"{name}.csv",
        "include_gyroscopic": False,
        "shape": shape_spec,
        "object": obj,
        "fingers": fingers,
        "controller": {"f_d": f_d, "k_v": 0.07},
        "closing": {},
        "sensor": {},
        "friction": {"k_s": 0.01},
        "baumgarte": {},
        "perturbations": perturbations or [],
    }
    return validate_config(raw)


def builtin_scene(name):
    """Construct one of the named preset scenarios."""
    if name == "cube":
        return _base_scene("cube", {"type": "cube", "side": 0.048})
    if name == "sphere":
        return _base_scene("sphere", {"type": "sphere", "radius": 0.024}, pair="antipodal")
    if name == "trapezoid":
        # The prism is stood on end (90 degrees about z) so the fingers pinch
        # its two parallel rectangular end faces.  Pinching the slanted sides
        # instead demands a large fixed amount of fingertip rolling before the
        # equilibrium conditions can hold, which is far slower than the other
        # presets.
        s = math.sqrt(0.5)
        return _base_scene(
            "trapezoid",
            {
                "type": "trapezoid",
                "height": 0.048,
                "small_base": 0.0277,
                "angle1_deg": 30.0,
                "angle2_deg": 15.0,
                "depth": 0.048,
            },
            orientation=[s, 0.0, 0.0, s],
        )
    if name == "cube_fd10":
        cfg = _base_scene("cube_fd10", {"type": "cube", "side": 0.048}, f_d=10.0)
        return cfg
    if name == "perturbed_cube":
        cfg = _base_scene(
            "perturbed_cube",
            {"type": "cube", "side": 0.048},
            perturbations=[
                {"time": 2.0, "finger": 1, "torque": 0.15},
                {"time": 3.0, "finger": 2, "torque": 0.15},
            ],
        )
        # leave room for the re-settle window after the second impulse
        cfg.duration = 6.0
        return cfg
    raise UnknownScene(f"no such scene {name!r}; choose from {', '.join(PRESETS)}")


# ---------------------------------------------------------------------------
# CSV logging

CSV_COLUMNS = (
    ["t"]
    + [f"q1_{k}" for k in range(4)]
    + [f"qd1_{k}" for k in range(4)]
    + [f"q2_{k}" for k in range(4)]
    + [f"qd2_{k}" for k in range(4)]
    + ["po_x", "po_y", "po_z", "quat_w", "quat_x", "quat_y", "quat_z"]
    + ["vo_x", "vo_y", "vo_z", "wo_x", "wo_y", "wo_z"]
    + ["phi", "psi", "f1", "f2", "lam1_x", "lam1_y", "lam2_x", "lam2_y"]
    + ["V", "W", "parallelism", "df1", "df2"]
    + ["dlam1_x", "dlam1_y", "dlam2_x", "dlam2_y", "dN1", "dN2", "S_N"]
    + ["beta_phi", "beta_psi", "gap1", "gap2", "roll_res", "maxvel", "phase"]
)


def _fmt(v):
    return format(float(v), ".12e")


class TrajectoryLog:
    """Buffered CSV writer with a crash-safe flush of the final row."""

    def __init__(self, path, columns, decimation):
        self.path = path
        self.columns = columns
        self.decimation = decimation
        self._rows = []
        self._pending = None
        self._count = 0

    def add(self, values):
        self._pending = values
        if self._count % self.decimation == 0:
            self._rows.append(values)
            self._pending = None
        self._count += 1

    def write(self):
        rows = list(self._rows)
        if self._pending is not None:
            rows.append(self._pending)
        d = os.path.dirname(self.path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(self.path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


# ---------------------------------------------------------------------------
# run orchestration


@dataclass
class RunSummary:
    verdict: str               # converged | settling | diverged
    settle_time: float         # s, first settle event (nan if none)
    settle_events: int
    log_path: str
    final_residuals: object    # EquilibriumResiduals (None if never grasped)
    final_forces: tuple
    final_q: tuple             # per-finger joint angles at the end
    steps: int
    wall_time: float
    history: dict              # full-rate arrays: t, phase, maxvel, f1, f2, V, W, ...


class _History:
    KEYS = ("t", "grasping", "maxvel", "f1", "f2", "V", "W", "gap1", "gap2", "roll_res")

    def __init__(self):
        self.data = {k: [] for k in self.KEYS}

    def add(self, **kw):
        for k in self.KEYS:
            self.data[k].append(kw[k])

    def arrays(self):
        return {k: np.asarray(v) for k, v in self.data.items()}


def _perturbation_steps(cfg):
    out = {}
    for p in cfg.perturbations:
        step = int(round(p["time"] / cfg.dt))
        out.setdefault(step, []).append((p["finger"] - 1, p["torque"]))
    return out


def run(config):
    """Execute a scenario to completion and return its summary.

    Dynamics aborts propagate after the log is flushed, so a dead run still
    leaves a CSV ending at its final state.
    """
    cfg = config
    chains = (build_chain(cfg.fingers[0]), build_chain(cfg.fingers[1]))
    dyn = build_dynamics(cfg, chains)
    cparams = build_controller(cfg, chains[0].n_joints)
    closing = build_closing(cfg)
    sensor_model = build_sensor_model(cfg)
    rng = np.random.default_rng(cfg.seed)
    sensors = (FrameSensor(sensor_model, 0, rng), FrameSensor(sensor_model, 1, rng))

    q0s = [np.asarray(f["q0"], dtype=float) for f in cfg.fingers]
    state = SystemState(
        fingers=tuple(kin.JointState(q, np.zeros_like(q)) for q in q0s),
        obj=build_object(cfg),
        rolling=RollingState(),
        t=0.0,
    )
    servo = ClosingServo(closing, q0s)
    phase = PhaseState()
    perturb = _perturbation_steps(cfg)
    kv_diags = (np.diag(cparams.K_v), np.diag(cparams.K_v))
    K_s_list = (dyn.friction.K_s1, dyn.friction.K_s2)
    f_d = cparams.f_d
    # diagonal velocity-damping gains per phase, made implicit in the solvers
    # (the finger mass matrix has eigenvalues ~1e-6, far too stiff for
    # explicit damping at the working dt)
    vdamp_grasp = np.concatenate([kv_diags[0], kv_diags[1], np.zeros(6)])
    vdamp_close = np.concatenate(
        [np.full(chains[0].n_joints, closing.kd), np.full(chains[1].n_joints, closing.kd),
         np.zeros(6)]
    )

    dt = cfg.dt
    n_steps = int(round(cfg.duration / dt))
    settle_window = int(round(diag.WINDOW / dt))
    loss_window = int(round(GRASP_LOSS_WINDOW / dt))
    dwell_steps = int(round(closing.dwell / dt))
    dwell_count = 0

    log = TrajectoryLog(cfg.log_path, CSV_COLUMNS, cfg.log_every)
    hist = _History()
    zero_mult = Multipliers(0.0, 0.0, np.zeros(2), np.zeros(2))

    rates_prev = None
    residuals = None
    settled = False
    settle_events = 0
    settle_time = math.nan
    ok_count = 0
    loss_count = 0
    last_pert_step = max(perturb) if perturb else -1
    t0 = time.perf_counter()
    step = 0
    try:
        for step in range(n_steps):
            grasping = phase.phase == GraspPhase.GRASPING
            data = dyn.evaluate(state, with_contacts=grasping)
            fe1, fe2 = data.fingers
            qd1, qd2 = state.fingers[0].qdot, state.fingers[1].qdot
            xd = state.xdot()
            maxvel = float(np.max(np.abs(xd)))

            if grasping:
                gaps = [data.queries[i].gap for i in range(2)]
                for g in gaps:
                    if g < -PENETRATION_TOL:
                        raise PenetrationExceeded(
                            f"contact gap {g:.2e} m beyond tolerance", step=step, time=state.t,
                            snapshot=state,
                        )
                frames = (data.queries[0].frame, data.queries[1].frame)
                sensed = tuple(sensors[i].sense(frames[i], state.t) for i in range(2))
                w_t = (fe1.Jw @ qd1, fe2.Jw @ qd2)
                rates = rolling_rates(w_t[0], w_t[1], sensed[0], sensed[1])
                if rates_prev is not None:
                    state.rolling.advance(rates_prev, rates, dt)
                rates_prev = rates
                phi, psi = relative_angles(state.rolling)

                u1 = grasp_torque(1, qd1, fe1.Jv, fe1.Jw, fe1.p_t, fe2.p_t,
                                  sensed[0].t_x, sensed[0].t_y, phi, psi, cparams)
                u2 = grasp_torque(2, qd2, fe2.Jv, fe2.Jw, fe1.p_t, fe2.p_t,
                                  sensed[1].t_x, sensed[1].t_y, phi, psi, cparams)
            else:
                gaps = [
                    surface_query(dyn.shape, state.obj.p_o, state.obj.rotation(), fe.p_t,
                                  chains[i].tip_radius).gap
                    for i, fe in enumerate(data.fingers)
                ]
                for g in gaps:
                    if g < -PENETRATION_TOL:
                        raise PenetrationExceeded(
                            f"contact gap {g:.2e} m beyond tolerance", step=step, time=state.t,
                            snapshot=state,
                        )
                phi = psi = 0.0
                u1 = servo.command(0, state.fingers[0].q, qd1, gaps[0], phase.contact[0], dt)
                u2 = servo.command(1, state.fingers[1].q, qd2, gaps[1], phase.contact[1], dt)

            if step in perturb:
                for fidx, tau in perturb[step]:
                    if fidx == 0:
                        u1 = u1 + tau
                    else:
                        u2 = u2 + tau
                settled = False
                ok_count = 0

            if grasping:
                xdd, mult = dyn.solve_constrained(state, data, u1, u2, dt, vdamp=vdamp_grasp)
                if min(mult.f1, mult.f2) <= 0.0:
                    loss_count += 1
                    if loss_count > loss_window:
                        raise GraspLost(
                            f"normal force non-positive for {GRASP_LOSS_WINDOW} s",
                            step=step, time=state.t, snapshot=state,
                        )
                else:
                    loss_count = 0
                roll_res = float(
                    np.max(np.abs((dyn._constraint_matrix(data) @ xd)[[1, 2, 4, 5]]))
                )
            else:
                xdd, mult = dyn.solve_free(state, data, u1, u2, dt, vdamp=vdamp_close)
                mult = zero_mult
                roll_res = 0.0

            # diagnostics at the current state
            M_s = dyn.assembled_mass(data, state.obj.mass)
            w_o = state.obj.w_o
            omega_rels = (fe1.Jw @ qd1 - w_o, fe2.Jw @ qd2 - w_o)
            energy = diag.lyapunov(
                xd, M_s, fe1.p_t, fe2.p_t, phi, psi, f_d, cparams.r,
                kv_diags, omega_rels, K_s_list, data.Q_s,
            )
            if grasping:
                residuals = diag.equilibrium_residuals(
                    fe1.p_t, fe2.p_t, state.obj.p_o, mult, frames, phi, psi, f_d
                )
                par = residuals.parallelism
            else:
                par = 0.0

            obj = state.obj
            row = (
                [state.t]
                + list(state.fingers[0].q) + list(qd1)
                + list(state.fingers[1].q) + list(qd2)
                + list(obj.p_o) + list(obj.orientation) + list(obj.v_o) + list(obj.w_o)
                + [phi, psi, mult.f1, mult.f2]
                + list(mult.lam1) + list(mult.lam2)
                + [energy.V, energy.W, par]
            )
            if grasping:
                row += list(residuals.df)
                row += [residuals.dlam[0][0], residuals.dlam[0][1],
                        residuals.dlam[1][0], residuals.dlam[1][1]]
                row += list(residuals.dN_norm) + [residuals.S_N_norm]
                row += [residuals.beta_phi, residuals.beta_psi]
            else:
                row += [0.0] * 11
            row += [gaps[0], gaps[1], roll_res, maxvel, phase.phase]
            log.add(row)
            hist.add(t=state.t, grasping=grasping, maxvel=maxvel, f1=mult.f1, f2=mult.f2,
                     V=energy.V, W=energy.W, gap1=gaps[0], gap2=gaps[1], roll_res=roll_res)

            # convergence bookkeeping (grasping phase only)
            if grasping:
                band = diag.FORCE_TOL_FRAC * f_d
                good = (
                    maxvel < diag.VEL_TOL
                    and abs(mult.f1 - f_d) < band
                    and abs(mult.f2 - f_d) < band
                )
                ok_count = ok_count + 1 if good else 0
                if settled and maxvel > PERTURB_WAKE * diag.VEL_TOL:
                    settled = False
                if not settled and ok_count >= settle_window:
                    settled = True
                    settle_events += 1
                    settled_at = state.t
                    if math.isnan(settle_time):
                        settle_time = state.t
                if (settled and step > last_pert_step + settle_window
                        and state.t >= settled_at + cfg.settle_hold):
                    break

            # advance
            state = dyn.integrate(state, xdd, dt)
            if not grasping:
                for i, g in enumerate(dyn.contact_gaps(state)):
                    phase.contact[i] = phase.contact[i] or g <= 0.0
                # dwell at contact until the approach momentum has drained, so
                # the grasp law starts from a near-static, symmetric state
                if all(phase.contact):
                    dwell_count += 1
                if dwell_count >= dwell_steps:
                    phase.phase = GraspPhase.GRASPING
                    entry = dyn.evaluate(state, with_contacts=True)
                    xd_p = dyn.project_velocities(state, entry)
                    n1 = chains[0].n_joints
                    n2 = chains[1].n_joints
                    state = SystemState(
                        fingers=(
                            kin.JointState(state.fingers[0].q, xd_p[:n1]),
                            kin.JointState(state.fingers[1].q, xd_p[n1:n1 + n2]),
                        ),
                        obj=ObjectState(
                            state.obj.p_o, state.obj.orientation,
                            xd_p[n1 + n2:n1 + n2 + 3], xd_p[n1 + n2 + 3:],
                            state.obj.mass, state.obj.inertia,
                        ),
                        rolling=state.rolling,
                        t=state.t,
                    )
                    state.rolling.reset()
                    rates_prev = None
    except PinchSimError:
        log.write()
        raise
    wall = time.perf_counter() - t0
    log.write()

    h = hist.arrays()
    if settled:
        verdict = "converged"
    else:
        mask = h["grasping"].astype(bool)
        if np.any(mask):
            verdict = diag.convergence_check(
                h["t"][mask], h["maxvel"][mask], h["f1"][mask], h["f2"][mask], f_d
            )
        else:
            verdict = "settling"
    return RunSummary(
        verdict=verdict,
        settle_time=settle_time,
        settle_events=settle_events,
        log_path=cfg.log_path,
        final_residuals=residuals,
        final_forces=(h["f1"][-1], h["f2"][-1]),
        final_q=tuple(np.array(f.q) for f in state.fingers),
        steps=step + 1,
        wall_time=wall,
        history=h,
    )
