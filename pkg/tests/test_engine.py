import numpy as np
import pytest

from affinebody import (ConstantBodyForce, ConstraintKind, Inertia, Metric,
                        Sum, ViscousDiscrete, body_state, comoving_rhs,
                        constrained_rhs, kinematical_momenta,
                        unconstrained_rhs)
from affinebody.errors import ConstraintViolation
from affinebody.integrate import integrate_fixed
from affinebody.tensors import two_polar
from conftest import random_metric, random_phi, random_spd
from test_forces import quadratic_hyperelastic


def zero_torque():
    return Sum(())


def run(system, state0, dt, n_steps, observer=None):
    post = (lambda t, y: system.stabilize(y)) if system.stabilize else None
    _, yf = integrate_fixed(system.f, system.pack(state0), 0.0, dt, n_steps,
                            post_step=post, observer=observer)
    return system.unpack(yf)


class TestUnconstrained:
    def test_free_motion_straight_lines(self, rng):
        g, eta = random_metric(2, rng), random_metric(2, rng)
        inert = Inertia(1.0, random_spd(2, rng))
        st0 = body_state([0.0, 0.0], np.eye(2), [0.3, -0.2],
                         0.1 * rng.standard_normal((2, 2)))
        sys = unconstrained_rhs(inert, zero_torque(), g, eta)
        st1 = run(sys, st0, 1e-3, 1000)
        assert np.allclose(st1.x, st0.x + st0.v, atol=1e-10)
        assert np.allclose(st1.phi, st0.phi + st0.phidot, atol=1e-10)
        assert np.allclose(st1.phidot, st0.phidot, atol=1e-12)

    def test_constant_force_uniform_acceleration(self, rng):
        g = eta = Metric.identity(2)
        inert = Inertia(2.0, np.eye(2))
        F = np.array([1.0, -0.5])
        sys = unconstrained_rhs(inert, ConstantBodyForce(field=F), g, eta)
        st0 = body_state([0.0, 0.0], np.eye(2), [0.1, 0.2], np.zeros((2, 2)))
        kappas, xis = [], []

        def obs(i, t, y):
            st = sys.unpack(y)
            kappas.append([sys.monitors[f"kappa{k}"](t, st) for k in range(2)])
            xis.append([sys.monitors[f"xi{k}"](t, st) for k in range(2)])

        st1 = run(sys, st0, 1e-3, 2000, observer=obs)
        t1 = 2.0
        assert np.allclose(st1.x, st0.x + st0.v * t1
                           + 0.5 * F / inert.mass * t1 ** 2, atol=1e-9)
        kappas = np.array(kappas)
        xis = np.array(xis)
        assert np.max(np.abs(kappas - kappas[0])) < 1e-8
        assert np.max(np.abs(xis - xis[0])) < 1e-8

    def test_scalar_harmonic_oracle(self):
        # n=1, V = (phi-1)^2/2 -> phidd = -phi(phi-1); compare with a direct
        # scalar integration of the same ODE
        g = eta = Metric.identity(1)
        inert = Inertia(1.0, np.eye(1))

        def u_fun(K):
            # K_1 = phi^2; U = (sqrt(K)-1)^2/2 gives V = (phi-1)^2/2
            return 0.5 * (np.sqrt(K[0]) - 1.0) ** 2

        def du_fun(K):
            r = np.sqrt(K[0])
            return np.array([0.5 * (r - 1.0) / r])

        from affinebody import HyperelasticInvariant
        model = HyperelasticInvariant(U=u_fun, grad_U=du_fun)
        sys = unconstrained_rhs(inert, model, g, eta)
        st0 = body_state([0.0], np.array([[1.2]]), [0.0], np.array([[0.0]]))

        # independent scalar oracle: y'' = -(y - 1)/y * ... balance gives
        # phi J phidd = N with N = -phi (phi - 1) g^-1 => phidd = -(phi-1)
        def scalar_rhs(t, y):
            return np.array([y[1], -(y[0] - 1.0)])

        _, y_sc = integrate_fixed(scalar_rhs, np.array([1.2, 0.0]), 0.0,
                                  1e-3, 3000)
        st1 = run(sys, st0, 1e-3, 3000)
        assert st1.phi[0, 0] == pytest.approx(y_sc[0], abs=1e-9)

    def test_energy_and_spin_conservation(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        model = quadratic_hyperelastic(n, c=1.0)
        st0 = body_state(np.zeros(n), random_phi(n, rng, 0.25), np.zeros(n),
                         0.15 * rng.standard_normal((n, n)))
        sys = unconstrained_rhs(inert, model, g, eta)
        energies, spins = [], []

        def obs(i, t, y):
            st = sys.unpack(y)
            energies.append(sys.monitors["energy"](t, st))
            spins.append(kinematical_momenta(st, inert, g).S.copy())

        run(sys, st0, 1e-3, 10000, observer=obs)
        e0 = energies[0]
        assert max(abs(e - e0) for e in energies) / max(1.0, abs(e0)) < 1e-6
        assert max(np.max(np.abs(s - spins[0])) for s in spins) < 1e-8


class TestComoving:
    def test_zero_velocity_stationary(self, rng):
        g, eta = random_metric(2, rng), random_metric(2, rng)
        inert = Inertia(1.0, random_spd(2, rng))
        sys = comoving_rhs(inert, zero_torque(), g, eta)
        st0 = body_state(np.zeros(2), random_phi(2, rng), np.zeros(2),
                         np.zeros((2, 2)))
        y0 = sys.pack(st0)
        dy = sys.f(0.0, y0)
        assert np.allclose(dy, 0.0, atol=1e-14)

    def test_free_comoving_omegahat_decay(self):
        # J = I, Omegahat = diag(a, b), Nhat = 0: dOmegahat/dt = -diag(a^2, b^2)
        g = eta = Metric.identity(2)
        inert = Inertia(1.0, np.eye(2))
        sys = comoving_rhs(inert, zero_torque(), g, eta)
        omh = np.diag([0.4, -0.3])
        phi = np.diag([1.5, 0.8])
        st0 = body_state(np.zeros(2), phi, np.zeros(2), phi @ omh)
        dy = sys.f(0.0, sys.pack(st0))
        n = 2
        domh = dy[2 * n + n * n:].reshape(n, n)
        assert np.allclose(domh, -omh @ omh, atol=1e-12)

    def test_matches_unconstrained(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.3, random_spd(n, rng))
        model = quadratic_hyperelastic(n, c=0.2)
        st0 = body_state([0.1, -0.1], random_phi(n, rng, 0.2), [0.2, 0.1],
                         0.3 * rng.standard_normal((n, n)))
        sys_n = unconstrained_rhs(inert, model, g, eta)
        sys_c = comoving_rhs(inert, model, g, eta)
        st_n = run(sys_n, st0, 1e-3, 1000)
        st_c = run(sys_c, st0, 1e-3, 1000)
        assert np.max(np.abs(st_n.phi - st_c.phi)) < 1e-8
        assert np.max(np.abs(st_n.x - st_c.x)) < 1e-8


def isometry(g, eta, rng):
    f = two_polar(random_phi(g.dim, rng), g, eta)
    return f.L @ f.R.T @ eta.mat


class TestConstrained:
    def test_gyroscopic_manifold_and_spin(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        model = quadratic_hyperelastic(n, c=0.3)  # symmetric torque
        phi0 = isometry(g, eta, rng)
        w = rng.standard_normal((n, n))
        om0 = 0.5 * (w - g.inv @ w.T @ g.mat)
        st0 = body_state(np.zeros(n), phi0, np.zeros(n), om0 @ phi0)
        sys = constrained_rhs(ConstraintKind.GYROSCOPIC, inert, model, g, eta)
        sys.check_initial(st0)
        resid, spins = [], []

        def obs(i, t, y):
            st = sys.unpack(y)
            resid.append(np.max(np.abs(sys.constraint_residual(st))))
            spins.append(kinematical_momenta(st, inert, g).S.copy())

        run(sys, st0, 1e-3, 10000, observer=obs)
        assert max(resid) < 1e-8
        assert max(np.max(np.abs(s - spins[0])) for s in spins) < 1e-8

    def test_gyroscopic_rejects_bad_state(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, np.eye(n))
        sys = constrained_rhs(ConstraintKind.GYROSCOPIC, inert, zero_torque(),
                              g, eta)
        st_bad = body_state(np.zeros(n), 1.7 * np.eye(n), np.zeros(n),
                            np.zeros((n, n)))
        with pytest.raises(ConstraintViolation):
            sys.check_initial(st_bad)

    def test_isochoric_det_preserved(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        target = np.sqrt(np.linalg.det(eta.mat) / np.linalg.det(g.mat))
        inert = Inertia(1.0, random_spd(n, rng))
        model = quadratic_hyperelastic(n, c=0.3)
        phi0 = random_phi(n, rng)
        phi0 *= (target / np.linalg.det(phi0)) ** (1.0 / n)
        w = rng.standard_normal((n, n))
        w -= np.trace(w) / n * np.eye(n)
        st0 = body_state(np.zeros(n), phi0, np.zeros(n), w @ phi0)
        sys = constrained_rhs(ConstraintKind.ISOCHORIC, inert, model, g, eta)
        sys.check_initial(st0)
        dets = []

        def obs(i, t, y):
            dets.append(abs(np.linalg.det(sys.unpack(y).phi) - target))

        run(sys, st0, 1e-3, 10000, observer=obs)
        assert max(dets) < 1e-10

    def test_dilatational_lambda_linear(self, rng):
        # with zero torque Eq. gives lambda'' = 0: lambda is linear in t
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        psi = isometry(g, eta, rng)
        lam0, lamdot0 = 1.3, 0.4
        st0 = body_state(np.zeros(n), lam0 * psi, np.zeros(n), lamdot0 * psi)
        sys = constrained_rhs(ConstraintKind.DILATATIONAL, inert,
                              zero_torque(), g, eta)
        sys.check_initial(st0)
        st1 = run(sys, st0, 1e-3, 2000)
        lam1 = (np.linalg.det(st1.phi)
                * np.sqrt(np.linalg.det(g.mat) / np.linalg.det(eta.mat))) \
            ** (1.0 / n)
        assert lam1 == pytest.approx(lam0 + lamdot0 * 2.0, abs=1e-8)

    def test_dilatational_scalar_oracle(self, rng):
        # pressure torque: Tr(eta J) lam lam'' = Tr(g N) = -p n; integrate the
        # scalar ODE independently
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        from affinebody import Pressure
        p0 = 0.4
        psi = isometry(g, eta, rng)
        lam0, lamdot0 = 1.2, 0.0
        st0 = body_state(np.zeros(n), lam0 * psi, np.zeros(n), lamdot0 * psi)
        sys = constrained_rhs(ConstraintKind.DILATATIONAL, inert,
                              Pressure(p=p0), g, eta)
        c = -p0 * n / float(np.sum(eta.mat * inert.J))

        def scalar_rhs(t, y):
            return np.array([y[1], c / y[0]])

        _, y_sc = integrate_fixed(scalar_rhs, np.array([lam0, lamdot0]),
                                  0.0, 1e-3, 1000)
        st1 = run(sys, st0, 1e-3, 1000)
        lam1 = (np.linalg.det(st1.phi)
                * np.sqrt(np.linalg.det(g.mat) / np.linalg.det(eta.mat))) \
            ** (1.0 / n)
        assert lam1 == pytest.approx(y_sc[0], abs=1e-9)

    def test_shape_preserving_manifold(self, rng):
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        model = quadratic_hyperelastic(n, c=0.2)
        psi = isometry(g, eta, rng)
        w = rng.standard_normal((n, n))
        om0 = 0.5 * (w - g.inv @ w.T @ g.mat) + 0.3 * np.eye(n)
        phi0 = 1.1 * psi
        st0 = body_state(np.zeros(n), phi0, np.zeros(n), om0 @ phi0)
        sys = constrained_rhs(ConstraintKind.SHAPE_PRESERVING, inert, model,
                              g, eta)
        sys.check_initial(st0)
        resid = []

        def obs(i, t, y):
            resid.append(np.max(np.abs(sys.constraint_residual(sys.unpack(y)))))

        run(sys, st0, 1e-3, 5000, observer=obs)
        assert max(resid) < 1e-8

    def test_rotation_free_spatial_invariant(self, rng):
        # Omega stays g-symmetric; Omegahat is G-symmetric, NOT eta-symmetric
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        model = quadratic_hyperelastic(n, c=1.0)
        phi0 = random_phi(n, rng)
        w = 0.3 * rng.standard_normal((n, n))
        om0 = 0.5 * (w + g.inv @ w.T @ g.mat)
        st0 = body_state(np.zeros(n), phi0, np.zeros(n), om0 @ phi0)
        sys = constrained_rhs(ConstraintKind.ROTATION_FREE_SPATIAL, inert,
                              model, g, eta)
        sys.check_initial(st0)
        asym_g, asym_eta, asym_G = [], [], []

        def obs(i, t, y):
            st = sys.unpack(y)
            om = st.phidot @ np.linalg.inv(st.phi)
            omh = np.linalg.inv(st.phi) @ st.phidot
            G = Metric(st.phi.T @ g.mat @ st.phi)
            asym_g.append(np.max(np.abs(om - g.transpose(om))))
            asym_eta.append(np.max(np.abs(omh - eta.transpose(omh))))
            asym_G.append(np.max(np.abs(omh - G.transpose(omh))))

        run(sys, st0, 1e-3, 2000, observer=obs)
        assert max(asym_g) < 1e-8
        assert max(asym_G) < 1e-8
        assert max(asym_eta) > 1e-3

    def test_rotation_free_material_invariant(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        model = quadratic_hyperelastic(n, c=0.3)
        phi0 = random_phi(n, rng)
        w = 0.3 * rng.standard_normal((n, n))
        omh0 = 0.5 * (w + eta.inv @ w.T @ eta.mat)
        st0 = body_state(np.zeros(n), phi0, np.zeros(n), phi0 @ omh0)
        sys = constrained_rhs(ConstraintKind.ROTATION_FREE_MATERIAL, inert,
                              model, g, eta)
        sys.check_initial(st0)
        bad = []

        def obs(i, t, y):
            st = sys.unpack(y)
            omh = np.linalg.inv(st.phi) @ st.phidot
            bad.append(np.max(np.abs(omh - eta.transpose(omh))))

        run(sys, st0, 1e-3, 1500, observer=obs)
        assert max(bad) < 1e-8

    def test_gyroscopic_spin_balance_with_symmetric_torque(self, rng):
        # symmetric N means the usual torque vanishes: spin exactly constant
        n = 3
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        phi0 = isometry(g, eta, rng)
        w = rng.standard_normal((n, n))
        om0 = 0.5 * (w - g.inv @ w.T @ g.mat)
        st0 = body_state(np.zeros(n), phi0, np.zeros(n), om0 @ phi0)
        sys = constrained_rhs(ConstraintKind.GYROSCOPIC, inert,
                              quadratic_hyperelastic(n, c=0.4), g, eta)
        spins = []

        def obs(i, t, y):
            spins.append(kinematical_momenta(sys.unpack(y), inert, g).S.copy())

        run(sys, st0, 1e-3, 3000, observer=obs)
        assert max(np.max(np.abs(s - spins[0])) for s in spins) < 1e-8


class TestDissipation:
    def test_energy_non_increasing_and_power_match(self, rng):
        n = 2
        g, eta = random_metric(n, rng), random_metric(n, rng)
        inert = Inertia(1.0, random_spd(n, rng))
        from affinebody import ExternalFriction
        model = Sum((ViscousDiscrete(alpha=0.5, beta=0.3),
                     ExternalFriction(alpha=0.2, beta=0.4, gamma=0.3)))
        st0 = body_state(np.zeros(n), random_phi(n, rng, 0.25), np.zeros(n),
                         0.5 * rng.standard_normal((n, n)))
        sys = unconstrained_rhs(inert, model, g, eta)
        ts, es, ps = [], [], []

        def obs(i, t, y):
            st = sys.unpack(y)
            ts.append(t)
            es.append(sys.monitors["energy"](t, st))
            ps.append(sys.monitors["power_dissipative"](t, st))

        run(sys, st0, 1e-4, 2000, observer=obs)
        es, ps, ts = map(np.asarray, (es, ps, ts))
        assert np.all(np.diff(es) <= 1e-14)
        assert np.all(ps <= 1e-12)
        d_edt = (es[2:] - es[:-2]) / (ts[2:] - ts[:-2])
        assert np.max(np.abs(d_edt - ps[1:-1])) < 1e-6
