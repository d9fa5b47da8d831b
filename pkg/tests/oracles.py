"""Independent oracles used by the test suite.

These deliberately avoid the package's solution paths: the linkage oracle
is a plain two-equation Newton root-find with a numeric Jacobian, the IoU
oracle rasterizes discs on a grid, and the kinematics oracle composes
elementary homogeneous transforms one by one.
"""

from __future__ import annotations

import math

import numpy as np


def newton_linkage(r, a, b, c, d, e, f, theta, beta0, xi0,
                   max_iter=80, tol=1e-13):
    """Solve the two loop-closure equations for (beta, xi) by Newton
    iteration with a forward-difference Jacobian.  Returns (beta, xi) or
    None if it did not converge from this start."""

    def residual(v):
        beta, xi = v
        return np.array([
            r * math.cos(theta) + f - a - e * math.cos(beta) - d * math.cos(xi),
            c + e * math.sin(beta) - b - d * math.sin(xi),
        ])

    v = np.array([beta0, xi0], dtype=float)
    h = 1e-7
    for _ in range(max_iter):
        f0 = residual(v)
        if np.max(np.abs(f0)) < tol:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            probe = v.copy()
            probe[j] += h
            jac[:, j] = (residual(probe) - f0) / h
        try:
            v = v - np.linalg.solve(jac, f0)
        except np.linalg.LinAlgError:
            return None
    if np.max(np.abs(residual(v))) > 1e-11:
        return None
    return float(v[0]), float(v[1])


def raster_iou(c1, c2, resolution=2000):
    """Disc IoU by counting grid-cell centers over the joint bounding box.

    c1, c2 expose .x, .y, .radius.
    """
    x_lo = min(c1.x - c1.radius, c2.x - c2.radius)
    x_hi = max(c1.x + c1.radius, c2.x + c2.radius)
    y_lo = min(c1.y - c1.radius, c2.y - c2.radius)
    y_hi = max(c1.y + c1.radius, c2.y + c2.radius)
    xs = np.linspace(x_lo, x_hi, resolution)[None, :]
    ys = np.linspace(y_lo, y_hi, resolution)[:, None]
    in1 = (xs - c1.x) ** 2 + (ys - c1.y) ** 2 <= c1.radius ** 2
    in2 = (xs - c2.x) ** 2 + (ys - c2.y) ** 2 <= c2.radius ** 2
    union = np.count_nonzero(in1 | in2)
    if union == 0:
        return 0.0
    return np.count_nonzero(in1 & in2) / union


def _rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0, 0.0], [s, c, 0.0, 0.0],
                     [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])


def _rot_x(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0, 0.0], [0.0, c, -s, 0.0],
                     [0.0, s, c, 0.0], [0.0, 0.0, 0.0, 1.0]])


def _trans(x, y, z):
    m = np.eye(4)
    m[:3, 3] = (x, y, z)
    return m


def compose_fk(joint_rows, q):
    """Forward kinematics by explicit elementary-transform products.

    joint_rows: iterable of (a, alpha, d, offset); returns (position,
    tool z axis).
    """
    transform = np.eye(4)
    for (a, alpha, d, offset), angle in zip(joint_rows, q):
        transform = (transform @ _rot_z(angle + offset) @ _trans(0, 0, d)
                     @ _trans(a, 0, 0) @ _rot_x(alpha))
    return transform[:3, 3], transform[:3, 2]
