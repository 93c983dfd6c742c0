"""Shared synthetic-data builders plus the acceptance-criteria summary."""

import re

import numpy as np

from relpose.epipolar import approx_intrinsics
from relpose.poses import AbsolutePose, RelativePose
from relpose.rotations import quat_to_rotmat, random_unit_quaternion

# measurements the acceptance tests want surfaced in the run summary
ACCEPTANCE_NOTES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, capture-proof."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            match = re.search(r"test_acceptance\.py::test_(criterion_\d+)_(\w+)", nodeid)
            if match and getattr(report, "when", "call") in ("call", "setup"):
                key = (int(match.group(1).split("_")[1]), match.group(2))
                results[key] = outcome if key not in results else "failed"
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for (number, label) in sorted(results):
        outcome = results[(number, label)]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({label}): {status}")
    for key in sorted(ACCEPTANCE_NOTES):
        terminalreporter.write_line(f"  note: {ACCEPTANCE_NOTES[key]}")


def random_pose(rng, scale=5.0):
    return AbsolutePose(random_unit_quaternion(rng),
                        rng.uniform(-scale, scale, size=3))


def two_view_rig(rng, n_points=50):
    """A random calibrated two-view rig with exact point correspondences.

    Camera 1 sits at the world origin; the relative pose is camera 2's
    world->camera transform. Points are kept well in front of both cameras so
    the projective division is stable. Returns (K, rel, x1, x2) with pixel
    coordinates as (n, 2) arrays.
    """
    width = int(rng.integers(320, 3840))
    height = int(rng.integers(240, 2160))
    fov = float(rng.uniform(30.0, 120.0))
    k = approx_intrinsics(width, height, fov)

    # moderate rotation keeps the scene in front of both cameras
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, np.pi / 6.0)
    q = np.concatenate([[np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis])
    t = rng.uniform(-1.0, 1.0, size=3)
    while np.linalg.norm(t) < 0.05:
        t = rng.uniform(-1.0, 1.0, size=3)
    rel = RelativePose(q, t)
    r = quat_to_rotmat(q)

    points = np.empty((n_points, 3))
    filled = 0
    while filled < n_points:
        cand = np.column_stack([
            rng.uniform(-2.0, 2.0, size=n_points - filled),
            rng.uniform(-2.0, 2.0, size=n_points - filled),
            rng.uniform(4.0, 12.0, size=n_points - filled),
        ])
        in_cam2 = cand @ r.T + t
        good = cand[in_cam2[:, 2] > 0.5]
        points[filled:filled + len(good)] = good
        filled += len(good)

    def project(pts):
        pix = pts @ k.matrix.T
        return pix[:, :2] / pix[:, 2:3]

    x1 = project(points)
    x2 = project(points @ r.T + t)
    return k, rel, x1, x2
