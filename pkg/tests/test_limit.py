import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viscofix.errors import UnsupportedOperation
from viscofix.limit import (
    FamilyEntry,
    Tolerances,
    anchor,
    certify,
    retraction,
    run_family,
    run_index,
    sunny_violation,
)
from viscofix.means import Cesaro
from viscofix.scheme import InnerSolveReport, Schedule, SchemeState, run_scheme
from viscofix.semigroup import Contraction, ContinuousFlow, DiscretePower, ProjectionMap, Rotation, fixed_set
from viscofix.space import AffineSubspace, Ball, Box

DISC = Ball([0.0, 0.0], 1.0)
FLOW = ContinuousFlow(np.diag([1.0, 0.0]), DISC)
QUARTER = Rotation(math.pi / 2, DISC)
DIAG_PROJ = ProjectionMap(AffineSubspace.spanned_by([[1.0, 1.0]], offset=[0.0, 0.2]), DISC)
REPS = {"flow": FLOW, "rotation": QUARTER, "diag_projection": DIAG_PROJ}


def grid_distance_to_fix(rep, x, h=2e-4):
    """Brute force: minimum distance from x to grid points that are fixed by the rep."""
    oracle = fixed_set(rep)
    # Fix is a segment here; parametrise it by a fine grid along its direction
    basis = oracle.subspace.basis
    if basis.shape[1] == 0:
        return float(np.linalg.norm(x - oracle.subspace.offset))
    u = basis[:, 0]
    ts = np.arange(-1.5, 1.5, h)
    pts = oracle.subspace.offset + ts[:, None] * u
    pts = pts[np.linalg.norm(pts - DISC.center, axis=1) <= DISC.radius]
    d = np.linalg.norm(pts - x, axis=1)
    # refine around the best grid point by a local quadratic (exact for a line)
    k = int(np.argmin(d))
    t = ts[np.linalg.norm(oracle.subspace.offset + ts[:, None] * u - DISC.center, axis=1) <= DISC.radius][k]
    local = np.linspace(t - h, t + h, 2001)
    cand = oracle.subspace.offset + local[:, None] * u
    cand = cand[np.linalg.norm(cand - DISC.center, axis=1) <= DISC.radius]
    return float(np.min(np.linalg.norm(cand - x, axis=1)))


def test_retraction_examples():
    np.testing.assert_allclose(retraction(FLOW, [0.5, 0.3]), [0, 0.3])
    np.testing.assert_allclose(retraction(QUARTER, [0.5, -0.7]), [0, 0])
    np.testing.assert_allclose(retraction(FLOW, [0.0, -0.4]), [0, -0.4])


@pytest.mark.parametrize("name", sorted(REPS))
def test_retraction_is_metric_projection(name, rng):
    rep = REPS[name]
    for x in DISC.sample(rng, 25):
        px = retraction(rep, x)
        assert abs(np.linalg.norm(x - px) - grid_distance_to_fix(rep, x)) <= 1e-10 + 1e-9


@pytest.mark.parametrize("name", sorted(REPS))
def test_sunny_characterization(name, rng):
    rep = REPS[name]
    oracle = fixed_set(rep)
    xs, zs = DISC.sample(rng, 100), oracle.sample(rng, 100)
    assert sunny_violation(rep, xs, zs) <= 1e-9
    # explicit double loop as an independent check
    worst = max(np.dot(x - oracle.project(x), z - oracle.project(x)) for x in xs[:20] for z in zs[:20])
    assert worst <= 1e-9


@pytest.mark.parametrize("name", sorted(REPS))
def test_retraction_idempotent_nonexpansive(name, rng):
    rep = REPS[name]
    xs, ys = DISC.sample(rng, 50), DISC.sample(rng, 50)
    for x, y in zip(xs, ys):
        px, py = retraction(rep, x), retraction(rep, y)
        np.testing.assert_allclose(retraction(rep, px), px, atol=1e-15)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12
        for t in (1, 2, 3):
            assert np.linalg.norm(rep.step(t, px) - px) <= 1e-9


def test_retraction_without_oracle():
    with pytest.raises(UnsupportedOperation):
        retraction(DiscretePower(lambda x: 0.5 * x, DISC), [0.1, 0.1])


def test_anchor_examples():
    np.testing.assert_allclose(anchor(Contraction(0.0, DISC, constant=[0.3, 0.1]), FLOW), [0.3, 0.1])
    assert np.linalg.norm(anchor(Contraction(0.5, DISC, matrix=0.5), FLOW)) <= 1e-12
    f = Contraction(0.5, DISC, matrix=0.5, offset=[0.3, 0.1])
    np.testing.assert_allclose(anchor(f, QUARTER), [0.3, 0.1], atol=1e-12)
    # flow: x* = f(P x*) solved by hand: x2 = 0.5 x2 + 0.1, x1 = 0.3
    np.testing.assert_allclose(anchor(f, FLOW), [0.3, 0.2], atol=1e-11)


@given(st.floats(0, 0.95), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_anchor_residual(alpha, b1, b2):
    f = Contraction(alpha, DISC, matrix=alpha, offset=[b1, b2])
    for rep in REPS.values():
        x = anchor(f, rep)
        assert np.linalg.norm(x - f(retraction(rep, x))) <= 1e-10


def _state(n, z):
    report = InnerSolveReport(0, 0.5, 0.0, 0.0, True, (), None)
    return SchemeState(n, 1 / (n + 1), np.asarray(z, dtype=float), {}, report)


def test_certify_at_the_limit():
    f = Contraction(0.5, DISC, matrix=0.5, offset=[0.3, 0.1])
    px = retraction(FLOW, anchor(f, FLOW))
    cert = certify([_state(n, px) for n in range(1, 21)], f, FLOW, family_tol=1e-3)
    assert np.all(cert.gamma_samples == 0)
    assert np.all(cert.gbh_slack == 0)
    assert cert.final_distance == 0
    assert cert.passed and cert.gamma_ok


def test_certify_rotation_run():
    f = Contraction(0.0, DISC, constant=[0.3, 0.1])
    traj = run_scheme(f, QUARTER, Cesaro(), Schedule(), 200, sample_ts=(1, 2))
    cert = certify(traj, f, QUARTER, family_tol=5e-3)
    np.testing.assert_allclose(cert.retraction_image, [0, 0])
    # z_200 = eps_200 c exactly since A_200 = 0
    assert cert.final_distance == pytest.approx(np.linalg.norm([0.3, 0.1]) / 201, abs=1e-10)
    assert cert.passed
    assert np.min(cert.gbh_slack) >= -1e-8


def test_certify_flow_run(flow_problem):
    p = flow_problem
    traj = run_scheme(p["f"], p["rep"], p["mu"], p["schedule"], 100, sample_ts=(1.0,))
    cert = certify(traj, p["f"], p["rep"], family_tol=1e-2)
    np.testing.assert_allclose(cert.retraction_image, [0, 0.2], atol=1e-11)
    assert cert.passed
    assert np.min(cert.gbh_slack) >= -1e-8
    # gamma is bounded below by a multiple of the squared distance, so it is never negative
    assert np.all(cert.gamma_samples >= (1 - 0.5) / 2 * np.linalg.norm(np.array([s.z for s in traj]) - cert.retraction_image, axis=1) ** 2 - 1e-12)


def test_negative_control_flow(flow_problem):
    p = flow_problem
    traj = run_scheme(p["f"], p["rep"], p["mu"], p["schedule"], 100)
    cert = certify(traj, p["f"], p["rep"], family_tol=1e-2, anchor_shift=[0.0, 0.1])
    assert np.min(cert.gbh_slack) < -1e-8
    assert not cert.gbh_ok and not cert.anchor_ok and not cert.passed
    assert "gbh" in cert.failures()


def test_negative_control_rotation_caught_by_anchor():
    f = Contraction(0.0, DISC, constant=[0.3, 0.1])
    traj = run_scheme(f, QUARTER, Cesaro(), Schedule(), 40)
    cert = certify(traj, f, QUARTER, family_tol=5e-3, anchor_shift=[0.1, 0.0])
    assert not cert.anchor_ok and not cert.passed


def _entry(label, n_outer=40, **kw):
    base = dict(
        f=Contraction(0.0, DISC, constant=[0.3, 0.1]),
        rep=QUARTER,
        mu=Cesaro(),
        schedule=Schedule(),
        n_outer=n_outer,
        tolerances=Tolerances(family_tol=5e-3, residual_target=5e-2),
        sample_ts=(1, 2),
    )
    base.update(kw)
    return FamilyEntry(label, **base)


def test_singleton_family_reduces_to_run_and_certify():
    e = _entry("rot", 80)
    fam = run_family([e])
    traj = run_scheme(e.f, e.rep, e.mu, e.schedule, e.n_outer, e.tolerances.inner_tol, e.sample_ts)
    cert = certify(traj, e.f, e.rep, family_tol=5e-3)
    r = fam["rot"]
    assert all(np.array_equal(a.z, b.z) for a, b in zip(r.trajectory, traj))
    assert r.final_distance == cert.final_distance
    assert fam.converged_all and fam.certified_all


def test_duplicates_bit_identical():
    fam = run_family([_entry("a"), _entry("b")])
    ta, tb = fam["a"].trajectory, fam["b"].trajectory
    assert all(x.z.tobytes() == y.z.tobytes() for x, y in zip(ta, tb))
    assert np.array_equal(fam["a"].certificate.gbh_slack, fam["b"].certificate.gbh_slack)


def test_family_rot_and_flow(flow_problem):
    p = flow_problem
    flow = FamilyEntry("flow", p["f"], p["rep"], p["mu"], p["schedule"], 200,
                       Tolerances(family_tol=1e-2), (1.0,))
    fam = run_family([_entry("rot", 200), flow], jobs=2)
    assert fam.labels == ["rot", "flow"]
    np.testing.assert_allclose(fam["rot"].certificate.retraction_image, [0, 0])
    np.testing.assert_allclose(fam["flow"].certificate.retraction_image, [0, 0.2], atol=1e-11)
    assert fam.converged_all and fam.certified_all
    assert fam.max_final_distance == max(fam["rot"].final_distance, fam["flow"].final_distance)


def test_parallel_matches_serial(flow_problem):
    entries = [_entry("a", 30), _entry("b", 50)]
    serial, parallel = run_family(entries), run_family(entries, jobs=2)
    for r, q in zip(serial.results, parallel.results):
        assert all(x.z.tobytes() == y.z.tobytes() for x, y in zip(r.trajectory, q.trajectory))
        assert r.certificate.summary() == q.certificate.summary()


def test_failure_is_isolated():
    bad = _entry("blackbox", rep=DiscretePower(lambda x: 0.5 * x, DISC))
    fam = run_family([bad, _entry("rot", 80)])
    assert fam["blackbox"].certificate is None and fam["blackbox"].error
    assert fam["rot"].converged
    assert not fam.converged_all
    assert math.isinf(fam.max_final_distance)


def test_converged_all_matches_tolerance():
    fam = run_family([_entry("tight", 40, tolerances=Tolerances(family_tol=1e-4))])
    r = fam["tight"]
    assert r.final_distance > 1e-4 and not fam.converged_all
    assert r.certificate.failures() == ["distance"]


def test_box_domain_certifies():
    box = Box([-1, -1], [1, 1])
    rep = ProjectionMap(AffineSubspace.spanned_by([[1.0, 0.0]]), box)
    f = Contraction(0.5, box, matrix=0.5, offset=[0.2, 0.2])
    traj = run_scheme(f, rep, Cesaro(), Schedule(), 200)
    cert = certify(traj, f, rep, family_tol=1e-2)
    # P onto the x-axis: x* = (0.5 x1 + 0.2, 0.2) gives x1 = 0.4
    np.testing.assert_allclose(cert.anchor, [0.4, 0.2], atol=1e-11)
    np.testing.assert_allclose(cert.retraction_image, [0.4, 0.0], atol=1e-11)
    assert cert.passed
