import numpy as np
import pytest

from affinebody import (ConstantBodyForce, ExternalFriction, HookeAnisotropic,
                        HookeGreenShifted, HookeIsotropic,
                        HyperelasticInvariant, IsotropicExpansion, Metric,
                        Pressure, Sum, ViscousContinuum, ViscousDiscrete,
                        body_state, potential_torque_from_gradient, power,
                        torque)
from affinebody.tensors import matrix_exponential, two_polar
from conftest import random_metric, random_phi


def make_state(phi, phidot=None, v=None):
    n = phi.shape[0]
    return body_state(np.zeros(n), phi,
                      v if v is not None else np.zeros(n),
                      phidot if phidot is not None else np.zeros((n, n)))


def quadratic_hyperelastic(n, k0=None, c=1.0):
    k0 = np.asarray(k0 if k0 is not None else [float(n)] * n, dtype=float)

    def u_fun(K):
        return 0.5 * c * float(np.sum((K - k0) ** 2))

    def du_fun(K):
        return c * (K - k0)

    return HyperelasticInvariant(U=u_fun, grad_U=du_fun)


def g_orthogonal(g, rng):
    """Random a with a^T g a = g."""
    n = g.dim
    w = rng.standard_normal((n, n))
    q, _ = np.linalg.qr(w)
    lam, vec = np.linalg.eigh(g.mat)
    g_half = vec @ np.diag(np.sqrt(lam)) @ vec.T
    g_mhalf = vec @ np.diag(1.0 / np.sqrt(lam)) @ vec.T
    return g_mhalf @ q @ g_half


class TestElasticTorques:
    def test_equilibrium_at_isometry(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        f = two_polar(random_phi(n, rng), g, eta)
        iso = f.L @ f.R.T @ eta.mat
        k0 = np.array([np.trace(np.linalg.matrix_power(
            np.eye(n), a)) for a in range(1, n + 1)])  # K at G = eta is all n
        for model in (quadratic_hyperelastic(n),
                      HookeIsotropic(lam=1.0, mu=0.5),
                      HookeGreenShifted(lam=1.0, mu=0.5)):
            N, nhat, F = torque(model, make_state(iso), g, eta)
            assert np.max(np.abs(N)) < 1e-10
            assert np.max(np.abs(F)) == 0.0

    def test_hooke_isotropic_hand_value(self):
        # C from the isotropic law contracted with E = diag(e, 0) by hand
        e = 0.01
        g = eta = Metric.identity(2)
        phi = np.diag([np.sqrt(1.0 + 2.0 * e), 1.0])
        _, nhat, _ = torque(HookeIsotropic(lam=0.0, mu=1.0), make_state(phi),
                            g, eta)
        assert np.allclose(nhat, np.diag([e, e]), atol=1e-14)
        _, nhat2, _ = torque(HookeIsotropic(lam=1.0, mu=0.0), make_state(phi),
                             g, eta)
        assert np.allclose(nhat2, np.diag([e, 0.0]), atol=1e-14)

    def test_hooke_anisotropic_matches_isotropic(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        lam, mu = 0.8, 1.3
        c = (lam * np.einsum("ak,bl->abkl", eta.inv, eta.inv)
             + mu * np.einsum("ab,kl->abkl", eta.inv, eta.inv))
        st = make_state(random_phi(n, rng))
        n1, _, _ = torque(HookeAnisotropic(Ctensor=c), st, g, eta)
        n2, _, _ = torque(HookeIsotropic(lam=lam, mu=mu), st, g, eta)
        assert np.allclose(n1, n2, atol=1e-12)

    def test_symmetric_elastic_torque(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        st = make_state(random_phi(n, rng))
        for model in (quadratic_hyperelastic(n),
                      HookeIsotropic(lam=0.7, mu=0.4),
                      HookeGreenShifted(lam=0.7, mu=0.4),
                      Pressure(p=1.1)):
            N, _, _ = torque(model, st, g, eta)
            assert np.max(np.abs(N - N.T)) < 1e-10

    def test_spatial_rotation_covariance(self, rng):
        # N(a phi, a phidot) = a N(phi, phidot) a^T for a in O(V, g)
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        a = g_orthogonal(g, rng)
        phi = random_phi(n, rng)
        phidot = rng.standard_normal((n, n))
        for model in (quadratic_hyperelastic(n),
                      HookeIsotropic(lam=0.7, mu=0.4),
                      ViscousDiscrete(alpha=0.5, beta=0.2)):
            n1, _, _ = torque(model, make_state(a @ phi, a @ phidot), g, eta)
            n0, _, _ = torque(model, make_state(phi, phidot), g, eta)
            assert np.allclose(n1, a @ n0 @ a.T, atol=1e-9)

    def test_material_invariance(self, rng):
        # N(phi b, phidot b) = N(phi, phidot) for b in O(U, eta)
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        b = g_orthogonal(eta, rng)
        phi = random_phi(n, rng)
        phidot = rng.standard_normal((n, n))
        for model in (quadratic_hyperelastic(n),
                      HookeIsotropic(lam=0.7, mu=0.4),
                      ViscousDiscrete(alpha=0.5, beta=0.2)):
            n1, _, _ = torque(model, make_state(phi @ b, phidot @ b), g, eta)
            n0, _, _ = torque(model, make_state(phi, phidot), g, eta)
            assert np.allclose(n1, n0, atol=1e-9)

    def test_isotropic_expansion_matches_hyperelastic(self, rng):
        # l_a = -2a dU/dK_a reindexed into the 0..n-1 expansion
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        model = quadratic_hyperelastic(n, k0=[1.0, 2.0, 3.0], c=0.7)
        phi = random_phi(n, rng)

        def coeff(K):
            du = 0.7 * (K - np.array([1.0, 2.0, 3.0]))
            return [-2.0 * (b + 1) * du[b] for b in range(n)]

        # the a-th power of (eta^-1 G) times G^-1 equals the (a-1)-th times eta^-1
        n1, _, _ = torque(model, make_state(phi), g, eta)
        n2, _, _ = torque(IsotropicExpansion(coefficients=coeff),
                          make_state(phi), g, eta)
        assert np.allclose(n1, n2, atol=1e-10)

    def test_cayley_hamilton_truncation(self, rng):
        # monomials of (eta^-1 G) above degree n-1 stay in the low-degree span
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        phi = random_phi(n, rng)
        ghat = eta.inv @ phi.T @ g.mat @ phi
        powers = [np.linalg.matrix_power(ghat, a) for a in range(n)]
        basis = np.array([p.ravel() for p in powers]).T
        for deg in (n, n + 1, 2 * n):
            target = np.linalg.matrix_power(ghat, deg).ravel()
            coef, res, *_ = np.linalg.lstsq(basis, target, rcond=None)
            recon = basis @ coef
            assert np.max(np.abs(recon - target)) < 1e-8


class TestDissipativeTorques:
    def test_viscous_discrete_pure_rotation(self):
        g = eta = Metric.identity(2)
        om = np.array([[0.0, 1.0], [-1.0, 0.0]])
        st = make_state(np.eye(2), om)
        N, _, _ = torque(ViscousDiscrete(alpha=1.0, beta=0.0), st, g, eta)
        assert np.allclose(N, 0.0, atol=1e-14)

    def test_nonnegative_coefficients_required(self):
        with pytest.raises(ValueError):
            ViscousDiscrete(alpha=-1.0, beta=0.0)
        with pytest.raises(ValueError):
            ExternalFriction(alpha=1.0, beta=-0.1, gamma=0.0)
        with pytest.raises(ValueError):
            ViscousContinuum(eta_vis=-0.1, zeta=0.0)

    def test_dissipation_sign(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        models = (ViscousDiscrete(alpha=0.5, beta=0.3),
                  ViscousContinuum(eta_vis=0.4, zeta=0.6, Vol0=1.2),
                  ExternalFriction(alpha=0.3, beta=0.5, gamma=0.2))
        for _ in range(20):
            st = make_state(random_phi(n, rng), rng.standard_normal((n, n)),
                            v=rng.standard_normal(n))
            for model in models:
                N, _, F = torque(model, st, g, eta)
                assert power(N, F, st, g) <= 1e-12

    def test_viscous_continuum_scale(self, rng):
        # reduces to the discrete law at unit D-phi factor
        g = eta = Metric.identity(2)
        phi = random_phi(2, rng)
        phi = phi / np.linalg.det(phi) ** 0.5  # det = 1
        st = make_state(phi, rng.standard_normal((2, 2)))
        n1, _, _ = torque(ViscousContinuum(eta_vis=0.7, zeta=2.0 * 0.7 / 2.0,
                                           Vol0=1.0), st, g, eta)
        n2, _, _ = torque(ViscousDiscrete(alpha=0.7, beta=0.0), st, g, eta)
        assert np.allclose(n1, n2, atol=1e-12)


class TestPotentialTorque:
    def test_constant_potential(self, rng):
        g = Metric.identity(2)
        nm, N = potential_torque_from_gradient(
            lambda phi: np.zeros_like(phi), random_phi(2, rng), g)
        assert np.allclose(N, 0.0)

    def test_scalar_oracle(self):
        # n=1, V = (phi-1)^2/2 at phi=2: N = -phi (phi-1) = -2
        g = Metric.identity(1)
        nm, N = potential_torque_from_gradient(
            lambda phi: phi - 1.0, np.array([[2.0]]), g)
        assert nm[0, 0] == pytest.approx(-2.0)

    def test_pressure_from_log_det(self, rng):
        # V = p ln det phi gives N = -p g^-1
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        p0 = 1.3
        phi = random_phi(n, rng)
        _, N = potential_torque_from_gradient(
            lambda m: p0 * np.linalg.inv(m).T, phi, g)
        n_model, _, _ = torque(Pressure(p=p0), make_state(phi), g, eta)
        assert np.allclose(N, n_model, atol=1e-10)

    def test_gradient_consistency_left_flow(self, rng):
        # d/ds V(exp(sX) phi) = -<N_mixed, X> with O(s^2) finite differences
        n = 3
        g, eta = random_metric(n, rng, spread=0.15), random_metric(n, rng,
                                                                   spread=0.15)
        model = quadratic_hyperelastic(n, k0=[3.0, 3.0, 3.0], c=0.1)
        phi = random_phi(n, rng, scale=0.2)

        def v_of(m):
            return model.potential_energy(m, g, eta)

        def grad_v(m):
            ghat = eta.inv @ m.T @ g.mat @ m
            powers = [np.eye(n)]
            for _ in range(n):
                powers.append(powers[-1] @ ghat)
            K = np.array([np.trace(powers[a]) for a in range(1, n + 1)])
            du = model.grad_U(K)
            out = np.zeros((n, n))
            for a in range(1, n + 1):
                out += 2.0 * a * du[a - 1] * g.mat @ m @ powers[a - 1] @ eta.inv
            return out

        nm, _ = potential_torque_from_gradient(grad_v, phi, g)
        s = 1e-5
        for _ in range(5):
            x = rng.standard_normal((n, n))
            x /= np.linalg.norm(x)
            plus = v_of(matrix_exponential(s * x) @ phi)
            minus = v_of(matrix_exponential(-s * x) @ phi)
            fd = (plus - minus) / (2.0 * s)
            assert fd == pytest.approx(-np.trace(nm @ x), abs=1e-6)

    def test_hyperelastic_two_routes_agree(self, rng):
        # controlling-function expansion vs the left-generator gradient route
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        model = quadratic_hyperelastic(n, k0=[2.0, 4.0, 8.0], c=0.9)
        phi = random_phi(n, rng)

        def grad_v(m):
            ghat = eta.inv @ m.T @ g.mat @ m
            powers = [np.eye(n)]
            for _ in range(n):
                powers.append(powers[-1] @ ghat)
            K = np.array([np.trace(powers[a]) for a in range(1, n + 1)])
            du = model.grad_U(K)
            out = np.zeros((n, n))
            for a in range(1, n + 1):
                out += 2.0 * a * du[a - 1] * g.mat @ m @ powers[a - 1] @ eta.inv
            return out

        _, n_grad = potential_torque_from_gradient(grad_v, phi, g)
        n_model, _, _ = torque(model, make_state(phi), g, eta)
        assert np.allclose(n_grad, n_model, atol=1e-8)


class TestPowerAndForce:
    def test_power_representations_agree(self, rng):
        # spatial and co-moving evaluations of the power coincide
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        phi = random_phi(n, rng)
        st = make_state(phi, rng.standard_normal((n, n)),
                        v=rng.standard_normal(n))
        model = Sum((quadratic_hyperelastic(n),
                     ViscousDiscrete(alpha=0.3, beta=0.1),
                     ConstantBodyForce(field=rng.standard_normal(n))))
        N, nhat, F = torque(model, st, g, eta)
        p_spatial = power(N, F, st, g)
        pinv = np.linalg.inv(phi)
        G = phi.T @ g.mat @ phi
        fhat = pinv @ F
        vhat = pinv @ st.v
        omh = pinv @ st.phidot
        p_comoving = float(fhat @ G @ vhat + np.trace(nhat @ G @ omh))
        assert p_spatial == pytest.approx(p_comoving, rel=1e-10, abs=1e-10)

    def test_constant_force(self, rng):
        g = eta = Metric.identity(2)
        field = np.array([1.0, -2.0])
        st = make_state(np.eye(2), v=np.array([0.5, 0.5]))
        N, _, F = torque(ConstantBodyForce(field=field), st, g, eta)
        assert np.allclose(N, 0.0)
        assert np.allclose(F, field)

    def test_sum_aggregates(self, rng):
        g, eta = random_metric(2, rng), random_metric(2, rng)
        st = make_state(random_phi(2, rng), rng.standard_normal((2, 2)))
        m1 = quadratic_hyperelastic(2)
        m2 = ViscousDiscrete(alpha=0.4, beta=0.1)
        n_sum, _, _ = torque(Sum((m1, m2)), st, g, eta)
        n_a, _, _ = torque(m1, st, g, eta)
        n_b, _, _ = torque(m2, st, g, eta)
        assert np.allclose(n_sum, n_a + n_b, atol=1e-12)
        assert Sum((m1, m2)).is_dissipative
        assert Sum((m1, m2)).potential_energy(st.phi, g, eta) is not None
        assert Sum((m1, HookeGreenShifted(lam=1.0, mu=1.0))).potential_energy(
            st.phi, g, eta) is None
