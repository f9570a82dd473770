import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import Delaunay

from sectorpde import _kernels

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def random_mesh(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (n, 2))
    tri = Delaunay(pts).simplices.astype(np.int64)
    # keep counterclockwise orientation
    p = pts[tri]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - \
            (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tri[cross < 0] = tri[cross < 0][:, [0, 2, 1]]
    return pts, np.ascontiguousarray(tri)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 200))
def test_backends_agree(seed, n):
    nodes, tris = random_mesh(seed, n)
    a, b = _kernels.numpy_impl, _kernels.numba_impl
    area_a, k_a = a.local_stiffness(nodes, tris)
    area_b, k_b = b.local_stiffness(nodes, tris)
    np.testing.assert_allclose(area_a, area_b, rtol=1e-13)
    np.testing.assert_allclose(k_a, k_b, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a.lumped_mass(nodes, tris, n), b.lumped_mass(nodes, tris, n), rtol=1e-13)
    vals = np.cos(3 * nodes[:, 0]) + nodes[:, 1] ** 2
    np.testing.assert_allclose(a.gradients(nodes, tris, vals), b.gradients(nodes, tris, vals),
                               rtol=1e-12, atol=1e-12)
    rng = np.random.default_rng(seed + 1)
    q = rng.uniform(-1.2, 1.2, (50, 2))
    loc = _kernels.Locator(nodes, tris)
    ta, ba = a.locate(nodes, tris, q, loc)
    tb, bb = b.locate(nodes, tris, q, loc)
    np.testing.assert_array_equal(ta >= 0, tb >= 0)
    # a point on a shared edge may land in either neighbour; compare interpolants
    ok = ta >= 0
    ia = (vals[tris[ta[ok]]] * ba[ok]).sum(1)
    ib = (vals[tris[tb[ok]]] * bb[ok]).sum(1)
    np.testing.assert_allclose(ia, ib, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(bb[~ok], 0.0)


def test_stiffness_rows_sum_to_zero():
    nodes, tris = random_mesh(3, 60)
    _, K = _kernels.local_stiffness(nodes, tris)
    np.testing.assert_allclose(K.sum(axis=2), 0.0, atol=1e-12)
    np.testing.assert_allclose(K, K.transpose(0, 2, 1), atol=1e-14)


def test_lumped_mass_total_is_area():
    nodes, tris = random_mesh(4, 80)
    area, _ = _kernels.local_stiffness(nodes, tris)
    assert _kernels.lumped_mass(nodes, tris, len(nodes)).sum() == pytest.approx(area.sum(), rel=1e-13)


def test_gradient_exact_for_linear():
    nodes, tris = random_mesh(5, 40)
    vals = 2.0 - 3.0 * nodes[:, 0] + 0.5 * nodes[:, 1]
    g = _kernels.gradients(nodes, tris, vals)
    np.testing.assert_allclose(g, np.tile([-3.0, 0.5], (len(tris), 1)), atol=1e-11)


def test_env_flag_selects_backend():
    code = "from sectorpde import _kernels; print(_kernels.active.name)"
    for name in ("numpy", "numba"):
        env = dict(os.environ, SECTORPDE_KERNELS=name)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert out.stdout.strip() == name
    env = dict(os.environ, SECTORPDE_KERNELS="fortran")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode != 0 and "SECTORPDE_KERNELS" in out.stderr
