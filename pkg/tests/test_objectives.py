import numpy as np
import pytest

from sdiging import objectives
from sdiging.errors import InvalidArgumentError
from sdiging.objectives import (
    DiskDistance,
    KMeansPoint,
    LocalObjective,
    LogisticSample,
    Quadratic,
    full_local_gradient,
    quadratic_family,
)


def central_diff(f, x, step):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def fd_check(func, points, rtol):
    for x in points:
        step = 1e-6 * (1.0 + np.linalg.norm(x))
        num = central_diff(func.value, x, step)
        ana = func.gradient(x)
        err = np.linalg.norm(ana - num) / (1.0 + np.linalg.norm(ana))
        assert err < rtol, f"finite-difference mismatch {err:.3e} at {x}"


# ---------------------------------------------------------------------------
# quadratic
# ---------------------------------------------------------------------------

def test_scalar_quadratic_optimum():
    prob = quadratic_family(1, 1, 1, (1.0, 1.0), seed=5)
    comp = prob.locals[0].components[0]
    assert comp.a[0, 0] == pytest.approx(1.0)
    assert prob.known_optimum[0] == pytest.approx(-comp.b[0])


def test_quadratic_family_optimum_via_dense_solve():
    prob = quadratic_family(2, 2, 2, (1.0, 2.0), seed=3)
    a_bar = np.zeros((2, 2))
    b_bar = np.zeros(2)
    for lo in prob.locals:
        for c in lo.components:
            a_bar += c.a / lo.q
            b_bar += c.b / lo.q
    x_direct = np.linalg.solve(a_bar, -b_bar)
    assert np.allclose(prob.known_optimum, x_direct, atol=1e-12)
    assert np.linalg.norm(prob.aggregate_gradient(prob.known_optimum)) < 1e-10


def test_quadratic_constants_bracket_spectrum():
    prob = quadratic_family(3, 4, 3, (0.5, 4.0), seed=1)
    for lo in prob.locals:
        for c in lo.components:
            eig = np.linalg.eigvalsh(c.a)
            assert c.mu == pytest.approx(eig[0], rel=1e-12)
            assert c.lip == pytest.approx(eig[-1], rel=1e-12)
            assert 0.5 - 1e-9 <= eig[0] and eig[-1] <= 4.0 + 1e-9


def test_quadratic_family_bad_range():
    with pytest.raises(InvalidArgumentError):
        quadratic_family(2, 2, 2, (2.0, 1.0), seed=0)


def test_quadratic_finite_difference():
    rng = np.random.default_rng(0)
    prob = quadratic_family(1, 3, 4, (1.0, 3.0), seed=9)
    pts = rng.standard_normal((20, 4))
    for c in prob.locals[0].components:
        fd_check(c, pts, 1e-5)


# ---------------------------------------------------------------------------
# logistic
# ---------------------------------------------------------------------------

def test_logistic_at_zero():
    c = np.array([1.5, -2.0, 0.5])
    f = LogisticSample(c=c, label=1, lam=2.0, m=4, q=7)
    x0 = np.zeros(3)
    assert f.value(x0) == pytest.approx(7 * np.log(2.0), rel=1e-14)
    assert np.allclose(f.gradient(x0), -(7 / 2.0) * c, atol=1e-14)


def test_logistic_separable_limit():
    f = LogisticSample(c=np.array([1.0, 0.0]), label=1, lam=1e-300, m=1, q=1)
    x = np.array([800.0, 0.0])
    assert f.value(x) < 1e-200
    assert np.linalg.norm(f.gradient(x)) < 1e-200


def test_logistic_overflow_safe():
    f = LogisticSample(c=np.array([1.0]), label=-1, lam=1.0, m=1, q=1)
    for t in (-1e4, 1e4):
        x = np.array([t])
        assert np.isfinite(f.value(x))
        assert np.isfinite(f.gradient(x)).all()


def test_logistic_finite_difference():
    rng = np.random.default_rng(4)
    for _ in range(30):
        c = rng.standard_normal(4)
        label = int(rng.choice([-1, 1]))
        f = LogisticSample(c=c, label=label, lam=1.0, m=5, q=6)
        fd_check(f, rng.standard_normal((5, 4)), 1e-6)


def test_logistic_rejects_bad_inputs():
    with pytest.raises(InvalidArgumentError):
        LogisticSample(c=np.ones(2), label=0, lam=1.0, m=1, q=1)
    with pytest.raises(InvalidArgumentError):
        LogisticSample(c=np.ones(2), label=1, lam=0.0, m=1, q=1)


def test_convexity_probes_quadratic_and_logistic():
    # (grad(a)-grad(b))'(a-b) >= mu ||a-b||^2 and the Lipschitz mirror
    rng = np.random.default_rng(7)
    funcs = [c for c in quadratic_family(2, 3, 3, (1.0, 2.5), seed=2)
             .locals[0].components]
    funcs += [LogisticSample(c=rng.standard_normal(3), label=1, lam=2.0,
                             m=3, q=4)]
    for f in funcs:
        for _ in range(1000):
            a = rng.standard_normal(3)
            b = rng.standard_normal(3)
            dg = f.gradient(a) - f.gradient(b)
            dx = a - b
            assert dg @ dx >= f.mu * (dx @ dx) - 1e-9
            assert np.linalg.norm(dg) <= f.lip * np.linalg.norm(dx) + 1e-9


# ---------------------------------------------------------------------------
# localization
# ---------------------------------------------------------------------------

def test_disk_inside_is_flat():
    f = DiskDistance(r=np.array([1.0, 1.0]), c_meas=4.0, a=4.0)  # radius 1
    x = np.array([1.2, 1.3])
    assert f.value(x) == 0.0
    assert np.all(f.gradient(x) == 0.0)


def test_disk_unit_circle_projection():
    f = DiskDistance(r=np.zeros(2), c_meas=1.0, a=1.0)  # radius 1
    x = np.array([2.0, 0.0])
    assert np.allclose(f.project(x), [1.0, 0.0], atol=1e-15)
    assert f.value(x) == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(f.gradient(x), [2.0, 0.0], atol=1e-14)


def test_disk_clamps_nonpositive_measurement():
    f = DiskDistance(r=np.zeros(2), c_meas=-3.0, a=100.0)
    assert f.clamped
    assert np.isfinite(f.radius) and f.radius > 0


def test_disk_finite_difference_off_boundary():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 50:
        r = rng.uniform(-2, 2, size=2)
        f = DiskDistance(r=r, c_meas=rng.uniform(0.5, 2.0), a=1.0)
        x = rng.uniform(-4, 4, size=2)
        if abs(np.linalg.norm(x - r) - f.radius) < 1e-4:
            continue
        fd_check(f, [x], 1e-5)
        checked += 1


def test_disk_convexity_probe():
    rng = np.random.default_rng(12)
    f = DiskDistance(r=np.array([0.5, -0.5]), c_meas=1.0, a=1.0)
    for _ in range(1000):
        a = rng.uniform(-3, 3, size=2)
        b = rng.uniform(-3, 3, size=2)
        assert (f.gradient(a) - f.gradient(b)) @ (a - b) >= -1e-12


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

def test_kmeans_single_center_is_quadratic():
    p = np.array([1.0, 2.0])
    f = KMeansPoint(p=p, k=1)
    x = np.array([0.5, 0.5])
    assert f.value(x) == pytest.approx(np.sum((p - x) ** 2))
    assert np.allclose(f.gradient(x), 2.0 * (x - p))


def test_kmeans_nearest_center_selection():
    f = KMeansPoint(p=np.zeros(2), k=2)
    x = np.array([1.0, 0.0, 3.0, 0.0])  # centers (1,0) and (3,0)
    assert f.value(x) == pytest.approx(1.0)
    assert np.allclose(f.gradient(x), [2.0, 0.0, 0.0, 0.0])


def test_kmeans_tie_breaks_low_index():
    f = KMeansPoint(p=np.zeros(2), k=2)
    x = np.array([1.0, 0.0, -1.0, 0.0])  # equidistant centers
    g = f.gradient(x)
    assert np.allclose(g, [2.0, 0.0, 0.0, 0.0])


def test_kmeans_finite_difference_off_boundaries():
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 50:
        f = KMeansPoint(p=rng.standard_normal(2), k=3)
        x = rng.uniform(-3, 3, size=6)
        d = np.sqrt(np.sum((x.reshape(3, 2) - f.p) ** 2, axis=1))
        d.sort()
        if d[1] - d[0] < 1e-4:
            continue
        fd_check(f, [x], 1e-5)
        checked += 1


# ---------------------------------------------------------------------------
# local objectives and aggregates
# ---------------------------------------------------------------------------

def test_full_local_gradient_singleton():
    f = LogisticSample(c=np.ones(2), label=1, lam=1.0, m=1, q=1)
    lo = LocalObjective(components=[f])
    x = np.array([0.3, -0.7])
    assert np.array_equal(full_local_gradient(lo, x), f.gradient(x))


def test_full_local_gradient_matrix_assembly():
    prob = quadratic_family(1, 5, 3, (1.0, 2.0), seed=8)
    lo = prob.locals[0]
    a_bar = sum(c.a for c in lo.components) / lo.q
    b_bar = sum(c.b for c in lo.components) / lo.q
    x = np.array([0.1, -0.2, 0.5])
    assert np.allclose(full_local_gradient(lo, x), a_bar @ x + b_bar,
                       atol=1e-13)


def test_full_local_gradient_logistic_at_zero():
    rng = np.random.default_rng(2)
    feats = rng.standard_normal((4, 3))
    labels = np.array([1, -1, 1, -1])
    lo = objectives.make_logistic_local(feats, labels, lam=1.0, m=2)
    expect = -np.sum(labels[:, None] * feats, axis=0) / 2.0
    assert np.allclose(lo.full_gradient(np.zeros(3)), expect, atol=1e-14)


def test_batch_gradient_matches_loop():
    rng = np.random.default_rng(6)
    feats = rng.standard_normal((8, 4))
    labels = rng.choice([-1, 1], size=8)
    lo = objectives.make_logistic_local(feats, labels, lam=2.0, m=3)
    for _ in range(20):
        x = rng.standard_normal(4)
        assert np.allclose(lo.full_gradient(x), full_local_gradient(lo, x),
                           atol=1e-14)
        direct = sum(c.value(x) for c in lo.components) / lo.q
        assert lo.value(x) == pytest.approx(direct, rel=1e-12)


def test_dimension_mismatch_rejected():
    prob = quadratic_family(1, 2, 3, (1.0, 2.0), seed=0)
    with pytest.raises(InvalidArgumentError):
        full_local_gradient(prob.locals[0], np.zeros(4))


def test_aggregate_consistency():
    prob = quadratic_family(3, 2, 2, (1.0, 2.0), seed=4)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2)
    g = sum(full_local_gradient(lo, x) for lo in prob.locals) / prob.m
    assert np.allclose(prob.aggregate_gradient(x), g, atol=1e-14)


def test_problem_constants():
    prob = quadratic_family(3, 4, 2, (0.7, 3.0), seed=6)
    mus = [c.mu for lo in prob.locals for c in lo.components]
    lips = [c.lip for lo in prob.locals for c in lo.components]
    assert prob.mu == pytest.approx(min(mus))
    assert prob.lip == pytest.approx(max(lips))
    assert prob.q_min == prob.q_max == 4


# ---------------------------------------------------------------------------
# CSV loaders
# ---------------------------------------------------------------------------

def test_logistic_csv_loader(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,0.5,-1.5\n-1,2.0,3.0\n")
    labels, feats = objectives.load_logistic_csv(path)
    assert list(labels) == [1, -1]
    assert np.allclose(feats, [[0.5, -1.5], [2.0, 3.0]])


def test_logistic_csv_rejects_bad_labels(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("2,0.5\n")
    with pytest.raises(InvalidArgumentError):
        objectives.load_logistic_csv(path)


def test_points_csv_loader(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("0.0,1.0\n2.5,-3.5\n")
    pts = objectives.load_points_csv(path)
    assert pts.shape == (2, 2)
    assert np.allclose(pts[1], [2.5, -3.5])
