import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.state import ChainConfig, SignConvention, Variant
from src.tools.diagnostics import compare_to_oracle
from src.tools.manifold import Sphere
from src.tools.sampler import (
    MassMatrix,
    chain_rng,
    draw_velocity,
    energy,
    fd_grad_log_pseudo_det,
    grad_log_pseudo_det,
    hamiltonian,
    init_state,
    integrate,
    kick,
    kick_sign,
    leapfrog_step,
    projected_mass,
    run_chain,
    to_momentum,
    transition,
)
from src.tools.target import BinghamVonMisesFisher, UniformTarget, VonMisesFisher, sample_vmf
from src.tools.verify_suites import reference_acceptance
from src.utils.errors import DriftTooLarge, InvalidInput, NotPSD
from src.utils.settings import settings
from tests.conftest import make_pd

E1 = np.array([1.0, 0.0, 0.0])
MU = np.array([0.0, 0.0, 1.0])


def _bingham(stiefel):
    return BinghamVonMisesFisher(stiefel, 2.0 * np.eye(4, 2), np.diag([1.0, 0.5, 0.0, -0.5]), [1.0, 0.5])


# ------------------------
# mass matrices
# ------------------------
def test_mass_matrix_forms():
    assert MassMatrix.identity(3).is_identity
    assert_array_equal(MassMatrix.diagonal([1.0, 2.0]).matrix, np.diag([1.0, 2.0]))
    assert MassMatrix.dense(np.eye(2)).form == "dense"
    # singular but PSD is allowed
    MassMatrix.dense(np.diag([1.0, 0.0]))


def test_mass_matrix_rejects_indefinite():
    with pytest.raises(NotPSD):
        MassMatrix.dense(np.diag([1.0, -0.5]))
    with pytest.raises(NotPSD):
        MassMatrix.diagonal([1.0, -1.0])
    with pytest.raises(InvalidInput):
        MassMatrix.dense([[1.0, 0.5], [0.0, 1.0]])


def test_projected_mass_dimension_mismatch(sphere):
    with pytest.raises(InvalidInput):
        projected_mass(sphere, MassMatrix.identity(4), E1)


# ------------------------
# projected mass
# ------------------------
def test_identity_projected_mass_at_e1(sphere):
    pm = projected_mass(sphere, MassMatrix.identity(3), E1)
    for name in ("operator", "pseudo_inverse", "sqrt", "inv_sqrt"):
        assert_allclose(pm.dense(name), np.diag([0.0, 1.0, 1.0]))
    assert pm.log_det == 0.0
    assert pm.rank == 2


def test_scaled_identity_log_det(sphere):
    pm = projected_mass(sphere, MassMatrix.dense(4.0 * np.eye(3)), E1)
    assert pm.log_det == pytest.approx(2.0 * np.log(4.0))
    assert pm.rank == 2


def test_projected_mass_caches_are_consistent(sphere, stiefel, rng):
    for m in (sphere, stiefel):
        mass = MassMatrix.dense(make_pd(m.ambient_dim, rng))
        x = m.uniform(rng)
        pm = projected_mass(m, mass, x)
        pi = pm.pi
        assert pm.rank == m.tangent_dim
        assert_allclose(pm.pseudo_inverse, pi @ pm.pseudo_inverse @ pi, atol=1e-9)
        assert_allclose(pm.operator @ pm.pseudo_inverse @ pm.operator, pm.operator, atol=1e-9)
        assert_allclose(pm.sqrt @ pm.sqrt, pm.operator, atol=1e-9)
        assert_allclose(pm.inv_sqrt @ pm.inv_sqrt, pm.pseudo_inverse, atol=1e-9)
        v = m.tangent_project(x, rng.standard_normal(m.ambient_dim))
        assert_allclose(to_momentum(pm, v), pm.operator @ v)
        assert pm.quad(v) == pytest.approx(float(v @ pm.operator @ v))


# ------------------------
# velocity draws
# ------------------------
def test_identity_velocity_at_e1(sphere, rng):
    pm = projected_mass(sphere, MassMatrix.identity(3), E1)
    draws = np.array([draw_velocity(pm, rng) for _ in range(20_000)])
    assert not np.any(draws[:, 0])
    assert_allclose(draws[:, 1:].var(axis=0), [1.0, 1.0], atol=0.05)


def test_dense_velocity_covariance(sphere, dense_s2):
    rng = np.random.default_rng(99)
    x = sphere.uniform(rng)
    pm = projected_mass(sphere, MassMatrix.dense(dense_s2), x)
    draws = np.array([draw_velocity(pm, rng) for _ in range(100_000)])
    cov = draws.T @ draws / draws.shape[0]
    target = pm.pseudo_inverse
    assert np.linalg.norm(cov - target) / np.linalg.norm(target) < 0.02
    assert np.max(np.abs(draws @ x)) < 1e-10


# ------------------------
# log-determinant gradient
# ------------------------
def test_closed_form_log_det_gradient_matches_finite_differences(sphere):
    rng = np.random.default_rng(5)
    mass = MassMatrix.dense(make_pd(3, rng))
    for _ in range(50):
        x = sphere.uniform(rng)
        closed = grad_log_pseudo_det(sphere, mass, x)
        fd = fd_grad_log_pseudo_det(sphere, mass, x)
        assert np.linalg.norm(closed - fd) / max(1.0, np.linalg.norm(closed)) < 1e-6


def test_log_det_gradient_vanishes_for_identity(sphere, stiefel, rng):
    assert not np.any(grad_log_pseudo_det(sphere, MassMatrix.identity(3), sphere.uniform(rng)))
    assert not np.any(grad_log_pseudo_det(stiefel, MassMatrix.identity(8), stiefel.uniform(rng)))


def test_stiefel_log_det_gradient_is_tangent(stiefel, rng):
    mass = MassMatrix.dense(make_pd(8, rng))
    x = stiefel.uniform(rng)
    g = grad_log_pseudo_det(stiefel, mass, x)
    assert np.linalg.norm(stiefel.tangent_project(x, g) - g) < 1e-10
    assert np.linalg.norm(g) > 0.0


def test_stiefel_log_det_gradient_matches_derivative_along_geodesics(stiefel):
    rng = np.random.default_rng(12)
    mass = MassMatrix.dense(make_pd(8, rng))
    t = 1e-4
    for _ in range(5):
        x = stiefel.uniform(rng)
        u = stiefel.tangent_project(x, rng.standard_normal(8))
        ahead, _ = stiefel.flow(x, u, t)
        behind, _ = stiefel.flow(x, -u, t)
        slope = (projected_mass(stiefel, mass, ahead).log_det - projected_mass(stiefel, mass, behind).log_det) / (2 * t)
        g = grad_log_pseudo_det(stiefel, mass, x)
        assert float(g @ u) == pytest.approx(slope, rel=1e-4, abs=1e-6)


def test_fd_gradient_rejects_bad_step(sphere):
    with pytest.raises(InvalidInput):
        fd_grad_log_pseudo_det(sphere, MassMatrix.identity(3), E1, step=0.0)


# ------------------------
# kick and energies
# ------------------------
def test_kick_sign_table():
    assert kick_sign(Variant.ALG1, SignConvention.AS_WRITTEN) == -1.0
    assert kick_sign(Variant.ALG2, SignConvention.AS_WRITTEN) == 1.0
    assert kick_sign(Variant.ALG1, SignConvention.APPENDIX_C) == 1.0
    assert kick_sign(Variant.ALG2, SignConvention.APPENDIX_C) == -1.0


def test_uniform_identity_kick_is_noop(sphere, rng):
    x = sphere.uniform(rng)
    pm = projected_mass(sphere, MassMatrix.identity(3), x)
    v = sphere.tangent_project(x, rng.standard_normal(3))
    for variant in Variant:
        assert_allclose(kick(variant, pm, v, np.zeros(3), 0.05), v, atol=1e-16)


def test_zero_step_kick_is_noop(sphere, dense_s2, rng):
    x = sphere.uniform(rng)
    pm = projected_mass(sphere, MassMatrix.dense(dense_s2), x)
    v = draw_velocity(pm, rng)
    assert_array_equal(kick(Variant.ALG1, pm, v, 5.0 * MU, 0.0), v)


def test_alg1_and_alg2_kicks_differ_by_the_log_det_term(sphere, dense_s2, rng):
    x = sphere.uniform(rng)
    mass = MassMatrix.dense(dense_s2)
    pm = projected_mass(sphere, mass, x)
    v = draw_velocity(pm, rng)
    grad = 5.0 * MU
    half = 0.05
    diff = kick(Variant.ALG2, pm, v, grad, half) - kick(Variant.ALG1, pm, v, grad, half)
    term = pm.pseudo_inverse @ pm.pseudo_inverse @ pm.pi @ dense_s2 @ x
    assert_allclose(diff, 2.0 * half * term, atol=1e-12)


def test_kick_output_is_tangent(sphere, dense_s2, rng):
    x = sphere.uniform(rng)
    pm = projected_mass(sphere, MassMatrix.dense(dense_s2), x)
    v = draw_velocity(pm, rng)
    for variant in Variant:
        out = kick(variant, pm, v, 5.0 * MU, 0.05)
        assert np.linalg.norm(sphere.tangent_project(x, out) - out) < 1e-8


def test_classic_energy_of_unit_velocity(sphere):
    pm = projected_mass(sphere, MassMatrix.identity(3), E1)
    v = np.array([0.0, 0.6, 0.8])
    assert energy(Variant.CLASSIC, pm, E1, v, UniformTarget(sphere)) == pytest.approx(0.5)


def test_energies_by_variant(sphere, dense_s2, rng):
    target = VonMisesFisher(sphere, 5.0, MU)
    x = sphere.uniform(rng)
    ident = projected_mass(sphere, MassMatrix.identity(3), x)
    v = draw_velocity(ident, rng)
    assert energy(Variant.ALG1, ident, x, v, target) == energy(Variant.CLASSIC, ident, x, v, target)
    pm = projected_mass(sphere, MassMatrix.dense(dense_s2), x)
    v = draw_velocity(pm, rng)
    gap = energy(Variant.ALG1, pm, x, v, target) - energy(Variant.ALG2, pm, x, v, target)
    assert gap == pytest.approx(pm.log_det, abs=1e-12)


def _dense_h(variant, x, v, target, mass_matrix):
    pi = np.eye(3) - np.outer(x, x)
    a = pi @ mass_matrix @ pi
    eig = np.linalg.eigvalsh(a)
    log_det = float(np.sum(np.log(eig[eig > 1e-10])))
    sign = 1.0 if variant is Variant.ALG1 else -1.0
    return -target.log_density_ambient(x) + sign * 0.5 * log_det + 0.5 * float(v @ a @ v)


@pytest.mark.parametrize("variant", [Variant.ALG1, Variant.ALG2])
def test_hamiltonian_matches_dense_formula(variant, sphere, dense_s2, rng):
    target = VonMisesFisher(sphere, 5.0, MU)
    mass = MassMatrix.dense(dense_s2)
    for _ in range(10):
        x = sphere.uniform(rng)
        pm = projected_mass(sphere, mass, x)
        v = draw_velocity(pm, rng)
        assert hamiltonian(variant, pm, x, v, target) == pytest.approx(
            _dense_h(variant, x, v, target, dense_s2), abs=1e-10)


@pytest.mark.parametrize("variant", [Variant.ALG1, Variant.ALG2])
def test_transition_acceptance_matches_independent_computation(variant, sphere, dense_s2, rng):
    target = VonMisesFisher(sphere, 5.0, MU)
    mass = MassMatrix.dense(dense_s2)
    cfg = ChainConfig(variant=variant, epsilon=0.1, n_leapfrog=10)
    alphas = []
    for i in range(10):
        x = sphere.uniform(rng)
        alpha, accept = reference_acceptance(cfg, x, target, mass, chain_rng(7, i))
        _, record = transition(x, cfg, target, mass, chain_rng(7, i))
        assert record["energy"] - record["proposed_energy"] == pytest.approx(alpha, abs=1e-9)
        assert record["accepted"] == accept
        alphas.append(alpha)
    assert max(abs(a) for a in alphas) > 1e-6


# ------------------------
# integrator
# ------------------------
@pytest.mark.parametrize("manifold", ["sphere", "stiefel"])
def test_identity_mass_variants_share_trajectories(manifold, sphere, stiefel, rng):
    m = sphere if manifold == "sphere" else stiefel
    target = VonMisesFisher(m, 5.0, MU) if manifold == "sphere" else _bingham(m)
    mass = MassMatrix.identity(m.ambient_dim)
    x = m.uniform(rng)
    v = m.tangent_project(x, rng.standard_normal(m.ambient_dim))
    paths = {}
    for variant in Variant:
        path = []
        integrate(variant, x, v, 0.1, 50, target, mass, path=path)
        paths[variant] = np.array([np.concatenate(p) for p in path])
    assert_array_equal(paths[Variant.ALG1], paths[Variant.CLASSIC])
    assert_array_equal(paths[Variant.ALG2], paths[Variant.CLASSIC])


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("manifold", ["sphere", "stiefel"])
def test_integrator_is_reversible(variant, manifold, sphere, stiefel, dense_s2):
    rng = np.random.default_rng(11)
    m = sphere if manifold == "sphere" else stiefel
    target = VonMisesFisher(m, 5.0, MU) if manifold == "sphere" else _bingham(m)
    mass = MassMatrix.dense(dense_s2 if manifold == "sphere" else np.eye(8) + 0.1 * make_pd(8, rng))
    for _ in range(10):
        x = m.uniform(rng)
        state = init_state(variant, x, None, target, mass)
        v = draw_velocity(state.pm, rng)
        fwd = integrate(variant, x, v, 0.05, 10, target, mass)
        back = integrate(variant, fwd.x, -fwd.v, 0.05, 10, target, mass)
        assert_allclose(back.x, x, atol=1e-8)
        assert_allclose(back.v, -v, atol=1e-8)


def test_single_step_stays_tangent(sphere, dense_s2, rng):
    target = VonMisesFisher(sphere, 5.0, MU)
    mass = MassMatrix.dense(dense_s2)
    x = sphere.uniform(rng)
    state = init_state(Variant.ALG2, x, None, target, mass)
    state.v = draw_velocity(state.pm, rng)
    nxt = leapfrog_step(Variant.ALG2, state, 0.1, target, mass)
    assert sphere.constraint_violation(nxt.x) < 1e-12
    assert np.linalg.norm(sphere.tangent_project(nxt.x, nxt.v) - nxt.v) < 1e-8


def test_energy_error_is_second_order(sphere):
    rng = np.random.default_rng(21)
    target = VonMisesFisher(sphere, 5.0, MU)
    mass = MassMatrix.identity(3)
    starts = []
    for _ in range(200):
        x = sphere.uniform(rng)
        starts.append((x, sphere.tangent_project(x, rng.standard_normal(3))))

    def mean_error(variant, eps, steps):
        errs = []
        for x, v in starts:
            state = init_state(variant, x, v, target, mass)
            end = integrate(variant, x, v, eps, steps, target, mass, state=state)
            errs.append(abs(energy(variant, state.pm, x, v, target) - energy(variant, end.pm, end.x, end.v, target)))
        return np.mean(errs)

    for variant in Variant:
        ratio = mean_error(variant, 0.1, 20) / mean_error(variant, 0.05, 40)
        assert 3.5 <= ratio <= 4.5


# ------------------------
# transitions and chains
# ------------------------
def test_zero_step_transition_always_accepts_in_place(sphere, dense_s2):
    cfg = ChainConfig(variant=Variant.ALG1, epsilon=0.0, n_leapfrog=5)
    x = np.array([0.0, 0.6, 0.8])
    rng = chain_rng(0)
    for _ in range(20):
        nxt, record = transition(x, cfg, VonMisesFisher(sphere, 5.0, MU), MassMatrix.dense(dense_s2), rng)
        assert record["accepted"] and not record["failed"]
        assert record["energy"] == pytest.approx(record["proposed_energy"], abs=1e-12)
        assert_array_equal(nxt, x)


def test_uniform_identity_chain_always_accepts(sphere):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.5, n_leapfrog=5, n_samples=500, seed=3)
    out = run_chain(cfg, UniformTarget(sphere), MassMatrix.identity(3), E1)
    assert out.acceptance_rate >= 0.99


def test_chain_is_deterministic(sphere, dense_s2):
    cfg = ChainConfig(variant=Variant.ALG2, epsilon=0.1, n_leapfrog=5, n_samples=200, n_burnin=20, seed=17)
    target = VonMisesFisher(sphere, 5.0, MU)
    a = run_chain(cfg, target, MassMatrix.dense(dense_s2), MU)
    b = run_chain(cfg, target, MassMatrix.dense(dense_s2), MU)
    assert_array_equal(a.samples, b.samples)
    assert a.records == b.records
    c = run_chain(cfg, target, MassMatrix.dense(dense_s2), MU, chain_index=1)
    assert not np.array_equal(a.samples, c.samples)


def test_identity_mass_variants_make_identical_decisions(sphere):
    target = VonMisesFisher(sphere, 5.0, MU)
    runs = [run_chain(ChainConfig(variant=v, epsilon=0.2, n_leapfrog=10, n_samples=300, seed=5),
                      target, MassMatrix.identity(3), E1) for v in Variant]
    for other in runs[1:]:
        assert_array_equal(other.samples, runs[0].samples)
        assert [r["accepted"] for r in other.records] == [r["accepted"] for r in runs[0].records]


def test_empty_chain(sphere):
    out = run_chain(ChainConfig(n_samples=0), UniformTarget(sphere), MassMatrix.identity(3), E1)
    assert out.samples.shape == (0, 3)
    assert out.records == []
    assert out.acceptance_rate == 0.0


def test_burnin_and_thinning_counts(sphere):
    cfg = ChainConfig(variant=Variant.CLASSIC, n_samples=30, n_burnin=7, thin=3, seed=2)
    out = run_chain(cfg, UniformTarget(sphere), MassMatrix.identity(3), E1)
    assert out.n_samples == 30
    assert len(out.records) == 30


def test_chain_rng_matches_seed_sequence_spawn():
    spawned = np.random.SeedSequence(42).spawn(3)
    for i, seq in enumerate(spawned):
        assert chain_rng(42, i).uniform() == np.random.default_rng(seq).uniform()


def test_run_chain_rejects_off_manifold_start(sphere):
    with pytest.raises(InvalidInput):
        run_chain(ChainConfig(n_samples=1), UniformTarget(sphere), MassMatrix.identity(3), [1.0, 1.0, 0.0])


def test_drift_beyond_limit_raises(stiefel):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.3, n_leapfrog=10, n_samples=50, seed=1)
    with pytest.raises(DriftTooLarge):
        run_chain(cfg, UniformTarget(stiefel), MassMatrix.identity(8), np.eye(4, 2).ravel(order="F"),
                  drift_limit=1e-300)


def test_reprojection_keeps_the_chain_on_the_manifold(stiefel):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.3, n_leapfrog=10, n_samples=50, seed=1,
                      reproject_each_step=True)
    out = run_chain(cfg, UniformTarget(stiefel), MassMatrix.identity(8), np.eye(4, 2).ravel(order="F"),
                    drift_limit=1e-300)
    assert max(stiefel.constraint_violation(x) for x in out.samples) <= 1e-10


def test_classic_ignores_mass(sphere, dense_s2):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.2, n_leapfrog=5, n_samples=100, seed=4)
    target = VonMisesFisher(sphere, 5.0, MU)
    a = run_chain(cfg, target, MassMatrix.dense(dense_s2), E1)
    b = run_chain(cfg, target, MassMatrix.identity(3), E1)
    assert_array_equal(a.samples, b.samples)


def test_dense_stiefel_chain_runs(stiefel):
    rng = np.random.default_rng(6)
    mass = MassMatrix.dense(np.eye(8) + 0.1 * make_pd(8, rng))
    cfg = ChainConfig(variant=Variant.ALG2, epsilon=0.05, n_leapfrog=5, n_samples=40, seed=8)
    out = run_chain(cfg, _bingham(stiefel), mass, np.eye(4, 2).ravel(order="F"))
    assert out.acceptance_rate > 0.5
    assert not any(r["failed"] for r in out.records)
    assert out.max_drift < 1e-10


# ------------------------
# statistical behavior
# ------------------------
def _vmf_check(variant, mass, convention, n, oracle, seed=2024):
    sphere = Sphere(3)
    steps = 10 if mass.is_identity else 5
    cfg = ChainConfig(variant=variant, epsilon=0.1, n_leapfrog=steps, n_samples=n, n_burnin=500,
                      seed=seed, sign_convention=convention)
    out = run_chain(cfg, VonMisesFisher(sphere, 5.0, MU), mass, MU)
    cmp = compare_to_oracle(out.samples, oracle)
    return max(float(np.max(np.abs(cmp.mean_z))), abs(cmp.resultant_z))


def _reweighted(oracle, mass, rng):
    inv = np.linalg.inv(mass)
    quad = np.einsum("ni,ij,nj->n", oracle, inv, oracle)
    return oracle[rng.uniform(size=oracle.shape[0]) < np.linalg.eigvalsh(inv)[0] / quad]


def test_uniform_sphere_second_moments(sphere):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.3, n_leapfrog=10, n_samples=10_000, n_burnin=100, seed=31)
    out = run_chain(cfg, UniformTarget(sphere), MassMatrix.identity(3), E1)
    assert np.max(np.abs((out.samples ** 2).mean(axis=0) - 1.0 / 3.0)) < 0.02


@pytest.mark.parametrize("variant,convention", [
    (Variant.CLASSIC, SignConvention.AS_WRITTEN),
    (Variant.ALG2, SignConvention.AS_WRITTEN),
    (Variant.ALG2, SignConvention.APPENDIX_C),
])
def test_vmf_chain_matches_oracle(variant, convention, dense_s2):
    mass = MassMatrix.identity(3) if variant is Variant.CLASSIC else MassMatrix.dense(dense_s2)
    oracle = sample_vmf(MU, 5.0, 10_000, np.random.default_rng(77))
    assert _vmf_check(variant, mass, convention, 10_000, oracle) < settings.z_threshold


def test_alg1_with_dense_mass_targets_determinant_weighted_density(dense_s2):
    rng = np.random.default_rng(78)
    oracle = _reweighted(sample_vmf(MU, 5.0, 20_000, rng), dense_s2, rng)
    assert _vmf_check(Variant.ALG1, MassMatrix.dense(dense_s2), SignConvention.AS_WRITTEN, 10_000, oracle) < settings.z_threshold


def test_wrong_target_is_detected(sphere):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.1, n_leapfrog=10, n_samples=5_000, seed=9)
    out = run_chain(cfg, VonMisesFisher(sphere, 5.0, MU), MassMatrix.identity(3), MU)
    rng = np.random.default_rng(10)
    uniform = np.array([sphere.uniform(rng) for _ in range(5_000)])
    assert compare_to_oracle(out.samples, uniform).max_abs_z > 5.0


def test_uniform_stiefel_moments(stiefel):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.3, n_leapfrog=10, n_samples=10_000, n_burnin=100, seed=41)
    out = run_chain(cfg, UniformTarget(stiefel), MassMatrix.identity(8), np.eye(4, 2).ravel(order="F"))
    assert np.max(np.abs(out.samples.mean(axis=0))) < 0.03
    assert np.max(np.abs((out.samples ** 2).mean(axis=0) - 0.25)) < 0.02


@pytest.mark.slow
@pytest.mark.parametrize("variant,convention", [
    (Variant.CLASSIC, SignConvention.AS_WRITTEN),
    (Variant.ALG2, SignConvention.AS_WRITTEN),
    (Variant.ALG2, SignConvention.APPENDIX_C),
])
def test_vmf_chain_matches_oracle_long(variant, convention, dense_s2):
    mass = MassMatrix.identity(3) if variant is Variant.CLASSIC else MassMatrix.dense(dense_s2)
    oracle = sample_vmf(MU, 5.0, 50_000, np.random.default_rng(177))
    assert _vmf_check(variant, mass, convention, 50_000, oracle, seed=4048) < settings.z_threshold


@pytest.mark.slow
def test_uniform_chains_long(sphere, stiefel):
    cfg = ChainConfig(variant=Variant.CLASSIC, epsilon=0.3, n_leapfrog=10, n_samples=50_000, n_burnin=100, seed=51)
    out = run_chain(cfg, UniformTarget(sphere), MassMatrix.identity(3), E1)
    assert np.max(np.abs((out.samples ** 2).mean(axis=0) - 1.0 / 3.0)) < 0.01
    out = run_chain(cfg, UniformTarget(stiefel), MassMatrix.identity(8), np.eye(4, 2).ravel(order="F"))
    assert np.max(np.abs(out.samples.mean(axis=0))) < 0.01
    assert np.max(np.abs((out.samples ** 2).mean(axis=0) - 0.25)) < 0.01
