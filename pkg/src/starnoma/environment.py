"""Indoor geometry: rooms, walls, STAR-RIS placement and visibility indicators.

Walls are infinitely thin 2-D segments.  A wall is either opaque or carries
a STAR-RIS; heights only enter 3-D distances, never occlusion.

Each surface stores an explicit forward normal.  The layouts shipped here
point it out of the room that holds the AP, so the forward side is the
transmission side and the backward side faces the AP (reflection side).

Layout files are YAML documents with the keys ``region``, ``walls``, ``ap``,
``surfaces`` and ``mus``; see ``data/verification_layout.yaml`` and the README
for the full grammar.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

GEOM_EPS = 1e-9


class DegenerateGeometryError(ValueError):
    """A device sits on a wall line, so its visibility is undefined."""


@dataclass(frozen=True)
class Wall:
    start: tuple[float, float]
    end: tuple[float, float]
    surface: int | None = None  # index of the STAR-RIS mounted on it, None if opaque

    @property
    def opaque(self) -> bool:
        return self.surface is None


@dataclass(frozen=True)
class Surface:
    center: tuple[float, float, float]
    forward_normal: tuple[float, float]
    m_h: int = 5
    m_v: int = 2
    spacing_h: float = 0.2
    spacing_v: float = 0.1

    @property
    def n_elements(self) -> int:
        return self.m_h * self.m_v

    def element_offsets(self) -> np.ndarray:
        """(M, 3) element positions relative to the center, grid centered.

        The horizontal axis runs along the wall, the vertical axis along z.
        Elements are numbered row-major over (vertical, horizontal).
        """
        nx, ny = self.forward_normal
        tangent = np.array([-ny, nx, 0.0])
        up = np.array([0.0, 0.0, 1.0])
        ih = (np.arange(self.m_h) - (self.m_h - 1) / 2) * self.spacing_h
        iv = (np.arange(self.m_v) - (self.m_v - 1) / 2) * self.spacing_v
        return np.array([a * tangent + b * up for b in iv for a in ih])


@dataclass(frozen=True)
class Layout:
    width: float
    depth: float
    walls: tuple[Wall, ...]
    ap: tuple[float, float, float]
    surfaces: tuple[Surface, ...]
    mus: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    mu_height: float = 0.0
    ap_axis: tuple[float, float] = (1.0, 0.0)  # direction of the AP's linear array

    def __post_init__(self):
        mus = np.asarray(self.mus, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "mus", mus)
        tagged = [w.surface for w in self.walls if w.surface is not None]
        if sorted(tagged) != list(range(len(self.surfaces))):
            raise ValueError("every surface must be mounted on exactly one wall")
        for p in [self.ap[:2], *[s.center[:2] for s in self.surfaces], *mus]:
            if not (-GEOM_EPS <= p[0] <= self.width + GEOM_EPS
                    and -GEOM_EPS <= p[1] <= self.depth + GEOM_EPS):
                raise ValueError(f"position {tuple(p)} lies outside the region")

    @property
    def n_mus(self) -> int:
        return len(self.mus)

    @property
    def n_surfaces(self) -> int:
        return len(self.surfaces)

    def mu_positions_3d(self) -> np.ndarray:
        return np.column_stack([self.mus, np.full(len(self.mus), self.mu_height)])

    def with_mus(self, mus) -> "Layout":
        return replace(self, mus=np.asarray(mus, dtype=float).reshape(-1, 2))

    def with_grid(self, m_h: int, m_v: int) -> "Layout":
        surfaces = tuple(replace(s, m_h=m_h, m_v=m_v) for s in self.surfaces)
        return replace(self, surfaces=surfaces)


@dataclass(frozen=True)
class AdjacencyIndicators:
    """Binary visibility structure; arrays indexed [u], [l], [l, u]."""

    c_b_u: np.ndarray
    c_b_l: np.ndarray
    c_f: np.ndarray
    c_b: np.ndarray

    def reachable(self) -> np.ndarray:
        """Per MU: True if at least one direct or surface path exists."""
        via = (self.c_b_l[:, None] * (self.c_f + self.c_b)).sum(axis=0)
        return (self.c_b_u + via) > 0


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    return (min(a[0], b[0]) - GEOM_EPS <= p[0] <= max(a[0], b[0]) + GEOM_EPS
            and min(a[1], b[1]) - GEOM_EPS <= p[1] <= max(a[1], b[1]) + GEOM_EPS)


def segments_cross(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test (touching counts as crossing)."""
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    s = [0 if abs(d) <= GEOM_EPS else (1 if d > 0 else -1) for d in (d1, d2, d3, d4)]
    if s[0] * s[1] < 0 and s[2] * s[3] < 0:
        return True
    if s[0] == 0 and _on_segment(q1, q2, p1):
        return True
    if s[1] == 0 and _on_segment(q1, q2, p2):
        return True
    if s[2] == 0 and _on_segment(p1, p2, q1):
        return True
    if s[3] == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def point_on_wall(p, wall: Wall) -> bool:
    a, b = np.asarray(wall.start), np.asarray(wall.end)
    ab = b - a
    t = np.clip(np.dot(np.asarray(p) - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(a + t * ab - p)) <= 1e-6


def _blocked(p, q, walls) -> bool:
    return any(segments_cross(p, q, w.start, w.end) for w in walls)


def compute_adjacency(layout: Layout) -> AdjacencyIndicators:
    U, L = layout.n_mus, layout.n_surfaces
    ap = layout.ap[:2]
    for u, p in enumerate(layout.mus):
        if any(point_on_wall(p, w) for w in layout.walls):
            raise DegenerateGeometryError(f"MU {u} at {tuple(p)} lies on a wall")

    c_b_u = np.array([0 if _blocked(ap, p, layout.walls) else 1 for p in layout.mus],
                     dtype=int)
    # surface links: every wall except the surface's own blocks (no multi-bounce paths)
    others = [[w for w in layout.walls if w.surface != l] for l in range(L)]
    c_b_l = np.array([0 if _blocked(ap, s.center[:2], others[l]) else 1
                      for l, s in enumerate(layout.surfaces)], dtype=int)
    c_f = np.zeros((L, U), dtype=int)
    c_b = np.zeros((L, U), dtype=int)
    for l, s in enumerate(layout.surfaces):
        center = np.asarray(s.center[:2])
        normal = np.asarray(s.forward_normal)
        for u, p in enumerate(layout.mus):
            side = float(np.dot(normal, p - center))
            if abs(side) <= GEOM_EPS:
                raise DegenerateGeometryError(f"MU {u} is on the plane of surface {l}")
            if _blocked(center, p, others[l]):
                continue
            if side > 0:
                c_f[l, u] = 1
            else:
                c_b[l, u] = 1
    return AdjacencyIndicators(c_b_u=c_b_u, c_b_l=c_b_l, c_f=c_f, c_b=c_b)


def _uniform_point(rng, layout: Layout) -> np.ndarray:
    while True:
        p = rng.uniform((0.0, 0.0), (layout.width, layout.depth))
        if not any(point_on_wall(p, w) for w in layout.walls):
            return p


def sample_deployment(rng, template: Layout, n_mus: int | None = None) -> Layout:
    """Independent uniform MU positions over the region, avoiding wall lines."""
    n = template.n_mus if n_mus is None else n_mus
    mus = np.array([_uniform_point(rng, template) for _ in range(n)]).reshape(-1, 2)
    return template.with_mus(mus)


def sample_reachable_deployment(rng, template: Layout, n_mus: int | None = None,
                                max_tries: int = 10_000) -> Layout:
    """Uniform positions conditioned on every MU having a non-zero path.

    MUs with no path at all have a rate of exactly zero for any beamforming,
    which would pin the min-rate reward at zero for the whole episode.
    """
    n = template.n_mus if n_mus is None else n_mus
    mus = []
    for _ in range(max_tries):
        if len(mus) == n:
            break
        p = _uniform_point(rng, template)
        if compute_adjacency(template.with_mus([p])).reachable()[0]:
            mus.append(p)
    else:
        raise RuntimeError("could not place reachable MUs; check the layout")
    return template.with_mus(np.array(mus).reshape(-1, 2))


def room_of(layout: Layout, p) -> int:
    """Quadrant index for the 2x2 shipped layouts: 0=SW, 1=SE, 2=NW, 3=NE."""
    return int(p[0] > layout.width / 2) + 2 * int(p[1] > layout.depth / 2)


# ---- text format -------------------------------------------------------------

def layout_to_dict(layout: Layout) -> dict:
    walls = []
    for w in layout.walls:
        d = {"from": list(map(float, w.start)), "to": list(map(float, w.end))}
        d["kind"] = "opaque" if w.opaque else "star_ris"
        if not w.opaque:
            d["surface"] = w.surface
        walls.append(d)
    surfaces = [{"center": list(map(float, s.center)),
                 "forward_normal": list(map(float, s.forward_normal)),
                 "grid": [s.m_h, s.m_v],
                 "spacing": [s.spacing_h, s.spacing_v]} for s in layout.surfaces]
    return {"region": [layout.width, layout.depth],
            "walls": walls,
            "ap": list(map(float, layout.ap)),
            "surfaces": surfaces,
            "ap_axis": list(map(float, layout.ap_axis)),
            "mu_height": layout.mu_height,
            "mus": [list(map(float, p)) for p in layout.mus]}


def layout_from_dict(d: dict) -> Layout:
    walls = []
    for w in d["walls"]:
        kind = w.get("kind", "opaque")
        if kind not in ("opaque", "star_ris"):
            raise ValueError(f"unknown wall kind {kind!r}")
        surface = int(w["surface"]) if kind == "star_ris" else None
        walls.append(Wall(tuple(map(float, w["from"])), tuple(map(float, w["to"])), surface))
    surfaces = []
    for s in d.get("surfaces", []):
        n = np.asarray(s["forward_normal"], dtype=float)
        n = n / np.linalg.norm(n)
        m_h, m_v = s.get("grid", [5, 2])
        sp_h, sp_v = s.get("spacing", [0.2, 0.1])
        surfaces.append(Surface(tuple(map(float, s["center"])), (float(n[0]), float(n[1])),
                                int(m_h), int(m_v), float(sp_h), float(sp_v)))
    width, depth = map(float, d["region"])
    return Layout(width=width, depth=depth, walls=tuple(walls),
                  ap=tuple(map(float, d["ap"])), surfaces=tuple(surfaces),
                  mus=np.asarray(d.get("mus") or np.zeros((0, 2)), dtype=float),
                  mu_height=float(d.get("mu_height", 0.0)),
                  ap_axis=tuple(map(float, d.get("ap_axis", (1.0, 0.0)))))


def load_layout(path) -> Layout:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return layout_from_dict(doc.get("layout", doc))


def save_layout(layout: Layout, path) -> None:
    Path(path).write_text(yaml.safe_dump(layout_to_dict(layout), sort_keys=False))


def verification_layout() -> Layout:
    """Fixed four-room deployment used for the verification stage."""
    text = resources.files("starnoma").joinpath("data/verification_layout.yaml").read_text()
    return layout_from_dict(yaml.safe_load(text))


def training_template() -> Layout:
    """The verification geometry with its MU list emptied."""
    return verification_layout().with_mus(np.zeros((0, 2)))
