import numpy as np
import pytest

from affinebody import (DAlembert, Inertia, Metric, SpatialAffine, body_state,
                        canonical_from_kinematical, euler_inertia,
                        kinematical_momenta, legendre, legendre_inverse)
from affinebody.errors import SingularInertia
from affinebody.tensors import two_polar
from conftest import random_metric, random_phi, random_spd


def test_inertia_validation():
    with pytest.raises(ValueError):
        Inertia(-1.0, np.eye(2))
    with pytest.raises(SingularInertia):
        Inertia(1.0, np.diag([1.0, 0.0]))
    eta = Metric(np.diag([2.0, 1.0]))
    inert = Inertia.isotropic(1.0, 3.0, eta)
    assert np.allclose(inert.J @ inert.Jinv, np.eye(2), atol=1e-12)
    assert inert.isotropy_scalar(eta) == pytest.approx(3.0)
    assert Inertia(1.0, np.diag([1.0, 2.0])).isotropy_scalar(
        Metric.identity(2)) is None


class TestEulerInertia:
    def test_identity(self, rng):
        j = random_spd(3, rng)
        assert np.allclose(euler_inertia(np.eye(3), Inertia(1.0, j)), j)

    def test_diagonal(self):
        out = euler_inertia(np.diag([2.0, 1.0]), Inertia(1.0, np.eye(2)))
        assert np.allclose(out, np.diag([4.0, 1.0]))

    def test_shear_oracle(self):
        # oracle: phi J phi^T by hand
        phi = np.array([[1.0, 1.0], [0.0, 1.0]])
        out = euler_inertia(phi, Inertia(1.0, np.eye(2)))
        assert np.allclose(out, [[2.0, 1.0], [1.0, 1.0]])


class TestKinematicalMomenta:
    def test_rest(self, rng):
        g = Metric.identity(2)
        inert = Inertia(2.0, random_spd(2, rng))
        st = body_state(np.zeros(2), random_phi(2, rng), np.zeros(2),
                        np.zeros((2, 2)))
        km = kinematical_momenta(st, inert, g)
        assert np.allclose(km.K, 0.0)
        assert np.allclose(km.S, 0.0)

    def test_rotation_oracle(self):
        # direct evaluation of K = phi J phidot^T and S = K - K^T
        g = Metric.identity(2)
        w = 0.8
        phidot = np.array([[0.0, -w], [w, 0.0]])
        st = body_state(np.zeros(2), np.eye(2), np.zeros(2), phidot)
        km = kinematical_momenta(st, Inertia(1.0, np.eye(2)), g)
        assert np.allclose(km.K, phidot.T)
        assert abs(km.S[0, 1]) == pytest.approx(2.0 * w)

    def test_linear_momentum(self):
        g = Metric.identity(2)
        st = body_state(np.zeros(2), np.eye(2), np.array([1.0, 2.0]),
                        np.zeros((2, 2)))
        km = kinematical_momenta(st, Inertia(3.0, np.eye(2)), g)
        assert np.allclose(km.k, [3.0, 6.0])

    def test_khat_pullback(self, rng):
        n = 3
        g = random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        phi = random_phi(n, rng)
        st = body_state(np.zeros(n), phi, rng.standard_normal(n),
                        rng.standard_normal((n, n)))
        km = kinematical_momenta(st, inert, g)
        pinv = np.linalg.inv(phi)
        assert np.allclose(km.Khat, pinv @ km.K @ pinv.T, atol=1e-10)
        # Khat^{AB} = Omh^B_C J^{CA}
        omh = pinv @ st.phidot
        assert np.allclose(km.Khat, inert.J @ omh.T, atol=1e-10)


class TestCanonicalMomenta:
    def test_dalembert_sigma_equals_K(self, rng):
        g = eta = Metric.identity(2)
        inert = Inertia(1.5, random_spd(2, rng))
        st = body_state(np.zeros(2), random_phi(2, rng),
                        rng.standard_normal(2), rng.standard_normal((2, 2)))
        cm = canonical_from_kinematical(st, inert, g, eta)
        km = kinematical_momenta(st, inert, g)
        assert np.allclose(cm.Sigma, km.K, atol=1e-12)

    def test_sigma_K_g_shift(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.5, random_spd(n, rng))
        st = body_state(np.zeros(n), random_phi(n, rng),
                        rng.standard_normal(n), rng.standard_normal((n, n)))
        cm = canonical_from_kinematical(st, inert, g, eta)
        km = kinematical_momenta(st, inert, g)
        assert np.allclose(cm.Sigma, km.K @ g.mat, atol=1e-10)
        # SigmaHat = Khat G
        G = st.phi.T @ g.mat @ st.phi
        assert np.allclose(cm.SigmaHat, km.Khat @ G, atol=1e-10)

    def test_spatial_affine_example(self):
        # Sigmahat = I T_eta(Omh) + A Omh; I=2, A=1, Omh=diag(1,-1)
        g = eta = Metric.identity(2)
        phi = np.eye(2)
        omh = np.diag([1.0, -1.0])
        st = body_state(np.zeros(2), phi, np.zeros(2), phi @ omh)
        model = SpatialAffine(mass=1.0, I=2.0, A=1.0, B=0.0)
        ps = legendre(model, st, g, eta)
        assert np.allclose(ps.SigmaHat, np.diag([3.0, -3.0]), atol=1e-12)

    def test_affine_A_only(self, rng):
        # I=0, A=1, B=0: Sigmahat = Omegahat
        g, eta = random_metric(2, rng), random_metric(2, rng)
        phi = random_phi(2, rng)
        phidot = rng.standard_normal((2, 2))
        st = body_state(np.zeros(2), phi, np.zeros(2), phidot)
        model = SpatialAffine(mass=1.0, I=0.0, A=1.0, B=0.0)
        ps = legendre(model, st, g, eta)
        assert np.allclose(ps.SigmaHat, np.linalg.inv(phi) @ phidot,
                           atol=1e-10)

    def test_casimir_equality(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        st = body_state(np.zeros(n), random_phi(n, rng),
                        rng.standard_normal(n), rng.standard_normal((n, n)))
        cm = canonical_from_kinematical(st, inert, g, eta)
        for k in range(1, n + 1):
            lhs = np.trace(np.linalg.matrix_power(cm.Sigma, k))
            rhs = np.trace(np.linalg.matrix_power(cm.SigmaHat, k))
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_spin_vorticity_antisymmetry(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        st = body_state(np.zeros(n), random_phi(n, rng),
                        rng.standard_normal(n), rng.standard_normal((n, n)))
        cm = canonical_from_kinematical(st, inert, g, eta)
        assert np.allclose(cm.spin + g.transpose(cm.spin), 0.0, atol=1e-12)
        assert np.allclose(cm.vorticity + eta.transpose(cm.vorticity), 0.0,
                           atol=1e-12)

    def test_rigid_motion_vorticity_is_comoving_spin(self, rng):
        # at an isometry with g-antisymmetric Omega, V = phi^-1 S phi
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        f = two_polar(random_phi(n, rng), g, eta)
        iso = f.L @ f.R.T @ eta.mat
        w = rng.standard_normal((n, n))
        om = 0.5 * (w - g.inv @ w.T @ g.mat)
        inert = Inertia.isotropic(1.0, 2.0, eta)
        st = body_state(np.zeros(n), iso, np.zeros(n), om @ iso)
        cm = canonical_from_kinematical(st, inert, g, eta)
        pinv = np.linalg.inv(iso)
        assert np.allclose(cm.vorticity, pinv @ cm.spin @ iso, atol=1e-9)

    def test_round_trip_through_inverse(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.7, random_spd(n, rng))
        st = body_state(rng.standard_normal(n), random_phi(n, rng),
                        rng.standard_normal(n), rng.standard_normal((n, n)))
        model = DAlembert(mass=inert.mass, J=inert.J)
        back = legendre_inverse(model, legendre(model, st, g, eta), g, eta)
        assert np.allclose(back.v, st.v, atol=1e-10)
        assert np.allclose(back.phidot, st.phidot, atol=1e-10)
