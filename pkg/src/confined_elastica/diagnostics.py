"""Curvature, energy and penetration diagnostics, and shape classification.

Stationary closed curves in balls are classified as ``circle(mu)`` (a flat,
mu-fold covered circle) or ``clew(mu, nu)``: a curve with nu-fold
rotational symmetry about an axis through its center that winds mu times
around that axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spline_fe import DiscreteCurve, bending_energy, evaluate, lumped_weights

__all__ = [
    "ClassificationResult",
    "curvature_profile",
    "classify",
    "normalized_energy",
    "penetration_report",
    "winding_number",
    "symmetry_score",
    "dominant_period",
]


@dataclass
class ClassificationResult:
    shape: str
    mu: int = 0
    nu: int = 1
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    scores: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.shape == "circle":
            return f"circle({self.mu})"
        if self.shape == "clew":
            return f"clew({self.mu},{self.nu})"
        return "unclassified"

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "label": self.label,
            "mu": int(self.mu),
            "nu": int(self.nu),
            "axis": [float(a) for a in self.axis],
            "scores": {k: (None if v is None else float(v)) for k, v in self.scores.items()},
        }


def _sample_params(curve: DiscreteCurve, samples_per_element: int, midpoints: bool = True):
    mesh = curve.mesh
    s = int(samples_per_element)
    if s < 1:
        raise ValueError("samples_per_element must be at least 1")
    offs = (np.arange(s) + 0.5) / s if midpoints else np.arange(s) / s
    x = mesh.nodes[:-1, None] + mesh.h[:, None] * offs[None, :]
    x = x.ravel()
    if not midpoints and not mesh.closed:
        x = np.append(x, mesh.nodes[-1])
    return x


def curvature_profile(curve: DiscreteCurve, samples_per_element: int = 4):
    """Return ``(x, |u''(x)|)`` at uniformly spaced element-interior points."""
    x = _sample_params(curve, samples_per_element)
    return x, np.linalg.norm(evaluate(curve, x, 2), axis=1)


def dominant_period(values) -> int:
    """Number of periods of the strongest non-constant Fourier mode."""
    values = np.asarray(values, dtype=float)
    power = np.abs(np.fft.rfft(values - values.mean()))
    if power.size < 2 or not np.any(power[1:] > 0):
        return 0
    return int(np.argmax(power[1:]) + 1)


def normalized_energy(curve: DiscreteCurve, kappa: float, length: float | None = None) -> float:
    """``sqrt(E_bend / E_L)`` with ``E_L = 2 kappa pi^2 / L``, the flat circle energy."""
    L = curve.mesh.length if length is None else float(length)
    E_L = 2.0 * kappa * np.pi**2 / L
    return float(np.sqrt(max(bending_energy(curve, kappa), 0.0) / E_L))


def penetration_report(curve: DiscreteCurve, conf) -> dict:
    pen = np.atleast_1d(conf.penetration(curve.positions))
    i = int(np.argmax(pen))
    return {"max_nodal": float(pen[i]), "node": i}


def _centroid(curve):
    beta = lumped_weights(curve.mesh)
    return beta @ curve.positions / beta.sum(), beta


def _rotation(axis, angle):
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def _polyline(curve, samples_per_element=4):
    x = _sample_params(curve, samples_per_element, midpoints=False)
    pts = evaluate(curve, x, 0)
    if curve.mesh.closed:
        pts = np.vstack([pts, pts[:1]])
    return pts


def _point_polyline_distance(points, poly):
    a = poly[:-1]
    ab = poly[1:] - a
    denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", ap, ab) / denom, 0.0, 1.0)
    diff = ap - t[..., None] * ab[None]
    return np.sqrt(np.min(np.einsum("pij,pij->pi", diff, diff), axis=1))


def symmetry_score(points, poly, center, axis, nu, scale) -> float:
    """Mean distance of the rotated nodes to the curve, relative to ``scale``."""
    R = _rotation(axis, 2 * np.pi / nu)
    rotated = (points - center) @ R.T + center
    return float(np.mean(_point_polyline_distance(rotated, poly)) / scale)


def winding_number(points, center, axis) -> float:
    """Signed number of turns of the closed polyline ``points`` around ``axis``."""
    axis = axis / np.linalg.norm(axis)
    e1 = np.cross(axis, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 0.5:
        e1 = np.cross(axis, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    z = points - center
    ang = np.arctan2(z @ e2, z @ e1)
    inc = np.diff(np.append(ang, ang[0]))
    inc = (inc + np.pi) % (2 * np.pi) - np.pi
    return float(inc.sum() / (2 * np.pi))


def classify(curve: DiscreteCurve, tol_sym: float = 0.02, tol_circ: float = 0.01,
             nu_max: int = 12, length: float | None = None) -> ClassificationResult:
    """Classify a closed curve as ``circle(mu)``, ``clew(mu, nu)`` or unclassified.

    Candidate axes are the principal axes of the lumped second-moment
    tensor. For each axis the symmetry order is the largest ``nu`` whose
    rotation by ``2 pi / nu`` maps the nodes onto the curve within
    ``tol_sym * r_L``; the winding number ``mu`` is the absolute number of
    turns of the projected curve around the axis.
    """
    mesh = curve.mesh
    if not mesh.closed:
        raise ValueError("classification needs a closed curve")
    L = mesh.length if length is None else float(length)
    r_L = L / (2 * np.pi)
    center, beta = _centroid(curve)
    z = curve.positions - center
    moment = (beta[:, None] * z).T @ z
    _, vecs = np.linalg.eigh(moment)
    poly = _polyline(curve)

    _, kappa = curvature_profile(curve, 4)
    kmean = kappa.mean()
    rel_std = float(kappa.std() / kmean) if kmean > 0 else np.inf
    period = dominant_period(kappa)

    normal = vecs[:, 0]
    flatness = float(np.max(np.abs(z @ normal)) / r_L)
    if rel_std < tol_circ and flatness < tol_circ:
        mu = int(round(abs(winding_number(poly[:-1], center, normal))))
        if mu >= 1:
            return ClassificationResult(
                "circle", mu, nu_max, normal,
                {"circle_flatness": flatness, "curvature_std": rel_std,
                 "symmetry_residual": 0.0, "curvature_period": period},
            )

    candidates = []
    for j in range(3):
        axis = vecs[:, j]
        radial = z - np.outer(z @ axis, axis)
        if np.max(np.linalg.norm(radial, axis=1)) < 1e-6 * r_L:
            continue
        nu, best = 1, None
        for order in range(2, nu_max + 1):
            score = symmetry_score(curve.positions, poly, center, axis, order, r_L)
            if score < tol_sym:
                nu, best = order, score
        mu = int(round(abs(winding_number(poly[:-1], center, axis))))
        candidates.append((nu, mu > 0, -(best if best is not None else np.inf), j, mu, best))
    if not candidates:
        return ClassificationResult("unclassified", 0, 1, vecs[:, 2],
                                    {"circle_flatness": flatness, "curvature_std": rel_std,
                                     "symmetry_residual": None, "curvature_period": period})
    nu, _, _, j, mu, best = max(candidates)
    axis = vecs[:, j]
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    scores = {"circle_flatness": flatness, "curvature_std": rel_std,
              "symmetry_residual": best, "curvature_period": period}
    if mu < 1:
        return ClassificationResult("unclassified", 0, nu, axis, scores)
    return ClassificationResult("clew", mu, nu, axis, scores)
