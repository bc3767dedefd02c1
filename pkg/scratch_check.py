import numpy as np
import affinebody as ab
from affinebody import hamilton as H
from affinebody import twopolar as TP
from affinebody.tensors import Metric

rng = np.random.default_rng(42)


def rand_phi(n, rng, scale=0.4):
    while True:
        p = np.eye(n) + scale * rng.standard_normal((n, n))
        if np.linalg.det(p) > 0.3:
            return p


def rand_metric(n, rng):
    a = rng.standard_normal((n, n)) * 0.3
    return Metric(np.eye(n) + a @ a.T)


# 1. two-polar reconstruction with random metrics
for n in (2, 3, 4):
    for _ in range(5):
        g, eta = rand_metric(n, rng), rand_metric(n, rng)
        phi = rand_phi(n, rng)
        f = ab.two_polar(phi, g, eta)
        rec = f.reconstruct(eta)
        assert np.linalg.norm(rec - phi) / np.linalg.norm(phi) < 1e-10, (n, np.linalg.norm(rec - phi))
        assert np.linalg.norm(f.L.T @ g.mat @ f.L - np.eye(n)) < 1e-10
        assert np.linalg.norm(f.R.T @ eta.mat @ f.R - np.eye(n)) < 1e-10
print("two-polar ok")

# 2. polar
for n in (2, 3):
    g, eta = rand_metric(n, rng), rand_metric(n, rng)
    phi = rand_phi(n, rng)
    pf = ab.polar(phi, g, eta)
    assert np.linalg.norm(pf.U_iso @ pf.A_sym - phi) < 1e-10
    assert np.linalg.norm(pf.B_sym @ pf.U_iso - phi) < 1e-10
    assert np.linalg.norm(pf.U_iso.T @ g.mat @ pf.U_iso - eta.mat) < 1e-10
print("polar ok")

# 3. legendre round trips
for n in (2, 3):
    g, eta = rand_metric(n, rng), rand_metric(n, rng)
    jm = rng.standard_normal((n, n)) * 0.3
    models = [
        H.DAlembert(mass=1.3, J=np.eye(n) + jm @ jm.T),
        H.SpatialAffine(mass=0.7, I=2.0, A=1.0, B=0.5),
        H.MaterialAffine(mass=1.1, I=1.5, A=-0.4, B=0.2),
        H.DoublyAffine(A=1.2, B=0.3),
        H.GeneralEightParam(m1=0.4, m2=0.8, I1=0.3, I2=1.4, I3=0.2, I4=0.1, A=0.9, B=0.2),
    ]
    for model in models:
        notrans = isinstance(model, H.DoublyAffine)
        st = ab.body_state(rng.standard_normal(n), rand_phi(n, rng),
                           np.zeros(n) if notrans else rng.standard_normal(n),
                           rng.standard_normal((n, n)))
        ps = H.legendre(model, st, g, eta)
        back = H.legendre_inverse(model, ps, g, eta)
        assert np.allclose(back.v, st.v, atol=1e-10), model
        assert np.allclose(back.phidot, st.phidot, atol=1e-10), model
        # energy equality: kinetic_hamiltonian equals T(velocities)
        ham = H.kinetic_hamiltonian(model, ps, g, eta)
        # compute T directly
        pinv = np.linalg.inv(st.phi)
        omh = pinv @ st.phidot
        om = st.phidot @ pinv
        G = st.phi.T @ g.mat @ st.phi
        vhat = pinv @ st.v
        if isinstance(model, H.DAlembert):
            T = 0.5 * model.mass * st.v @ g.mat @ st.v + 0.5 * np.trace(model.J @ st.phidot.T @ g.mat @ st.phidot)
        elif isinstance(model, H.SpatialAffine):
            Tht = eta.inv @ omh.T @ eta.mat
            T = 0.5 * model.mass * vhat @ eta.mat @ vhat + 0.5 * (
                model.I * np.trace(Tht @ omh) + model.A * np.trace(omh @ omh) + model.B * np.trace(omh) ** 2)
        elif isinstance(model, H.MaterialAffine):
            Tg = g.inv @ om.T @ g.mat
            T = 0.5 * model.mass * st.v @ g.mat @ st.v + 0.5 * (
                model.I * np.trace(Tg @ om) + model.A * np.trace(om @ om) + model.B * np.trace(om) ** 2)
        elif isinstance(model, H.DoublyAffine):
            T = 0.5 * (model.A * np.trace(omh @ omh) + model.B * np.trace(omh) ** 2)
        else:
            Ginv = pinv @ g.inv @ pinv.T
            T = 0.5 * (model.m1 * vhat @ G @ vhat + model.m2 * vhat @ eta.mat @ vhat)
            quad = (model.I1 * np.einsum('kl,mn,km,ln', G, Ginv, omh, omh)
                    + model.I2 * np.einsum('kl,mn,km,ln', eta.mat, eta.inv, omh, omh)
                    + model.I3 * np.einsum('kl,mn,km,ln', G, eta.inv, omh, omh)
                    + model.I4 * np.einsum('kl,mn,km,ln', eta.mat, Ginv, omh, omh))
            T += 0.5 * quad + 0.5 * model.A * np.trace(omh @ omh) + 0.5 * model.B * np.trace(omh) ** 2
        assert abs(ham - T) < 1e-9 * max(1, abs(T)), (model, ham, T)
print("legendre ok")

# 3b. invariant (Casimir) form equality
for n in (2, 3):
    g, eta = rand_metric(n, rng), rand_metric(n, rng)
    for model in (H.SpatialAffine(mass=1.0, I=1.0, A=2.0, B=0.0),
                  H.MaterialAffine(mass=1.0, I=1.0, A=2.0, B=0.7)):
        st = ab.body_state(np.zeros(n), rand_phi(n, rng), np.zeros(n),
                           rng.standard_normal((n, n)))
        ps = H.legendre(model, st, g, eta)
        h1 = H.kinetic_hamiltonian(model, ps, g, eta)
        h2 = H.kinetic_hamiltonian_invariant_form(model, ps, g, eta)
        # h1 includes translational part = 0 here (v=0 => p=0)
        assert abs(h1 - h2) < 1e-9 * max(1, abs(h1)), (model, h1, h2)
print("casimir-form ok")

# 4. kinetic phase-function gradients vs finite differences
def fd_grad(Hfun, state, g, eta, eps=1e-6):
    n = state.dim
    x0, p0 = state.x.copy(), state.p.copy()
    phi0, P0 = state.phi_mat.copy(), state.P.copy()

    def val(x, phi, p, P):
        return Hfun(H.phase_state(x, phi, p, P))

    gx = np.zeros(n); gp = np.zeros(n)
    gphi = np.zeros((n, n)); gP = np.zeros((n, n))
    for i in range(n):
        for (arr, out) in ((x0, gx), (p0, gp)):
            d = np.zeros(n); d[i] = eps
            if arr is x0:
                out[i] = (val(x0 + d, phi0, p0, P0) - val(x0 - d, phi0, p0, P0)) / (2 * eps)
            else:
                out[i] = (val(x0, phi0, p0 + d, P0) - val(x0, phi0, p0 - d, P0)) / (2 * eps)
    for i in range(n):
        for j in range(n):
            d = np.zeros((n, n)); d[i, j] = eps
            gphi[i, j] = (val(x0, phi0 + d, p0, P0) - val(x0, phi0 - d, p0, P0)) / (2 * eps)
            gP[i, j] = (val(x0, phi0, p0, P0 + d) - val(x0, phi0, p0, P0 - d)) / (2 * eps)
    return gx, gphi, gp, gP

for n in (2, 3):
    g, eta = rand_metric(n, rng), rand_metric(n, rng)
    jm = rng.standard_normal((n, n)) * 0.3
    models = [
        H.DAlembert(mass=1.3, J=np.eye(n) + jm @ jm.T),
        H.SpatialAffine(mass=0.7, I=2.0, A=1.0, B=0.5),
        H.MaterialAffine(mass=1.1, I=1.5, A=-0.4, B=0.2),
        H.DoublyAffine(A=1.2, B=0.3),
        H.GeneralEightParam(m1=0.4, m2=0.8, I1=0.3, I2=1.4, I3=0.2, I4=0.1, A=0.9, B=0.2),
    ]
    for model in models:
        pf = H.kinetic_phase_function(model, g, eta)
        ps = H.phase_state(rng.standard_normal(n), rand_phi(n, rng),
                           rng.standard_normal(n), rng.standard_normal((n, n)))
        ga = pf.grad(ps)
        gf = fd_grad(pf.value, ps, g, eta)
        for k, name in enumerate(("x", "phi", "p", "P")):
            err = np.max(np.abs(np.asarray(ga[k]) - np.asarray(gf[k])))
            assert err < 5e-8, (type(model).__name__, name, err)
print("gradients ok")

# 5. reduction: C2 identity and round trip
for n in (2, 3, 4):
    g, eta = rand_metric(n, rng), rand_metric(n, rng)
    phi = rand_phi(n, rng)
    P = rng.standard_normal((n, n))
    ps = H.phase_state(np.zeros(n), phi, np.zeros(n), P)
    red = TP.reduce(ps, g, eta)
    # C2 from full Sigma vs lattice formula (alpha = 1/2 => H = C2)
    c2_full = H.casimir(ps.Sigma, 2)
    c2_red = TP.lattice_hamiltonian(TP.HyperbolicCasimir(alpha=0.5), red)
    assert abs(c2_full - c2_red) < 1e-8 * max(1, abs(c2_full)), (n, c2_full, c2_red)
    # rho = spin, -tau = vorticity
    S = ps.Sigma - g.transpose(ps.Sigma)
    V = ps.SigmaHat - eta.transpose(ps.SigmaHat)
    assert np.allclose(red.spin(), S, atol=1e-8)
    assert np.allclose(red.vorticity(), V, atol=1e-8)
    # round trip
    back = TP.reconstruct(red, g, eta)
    assert np.linalg.norm(back.phi_mat - phi) < 1e-8
    assert np.linalg.norm(back.Sigma - ps.Sigma) < 1e-8
print("reduction ok")

# 6. cross-integration: full GL(2) Casimir flow vs reduced lattice flow
from affinebody.integrate import integrate_fixed

n = 2
g, eta = Metric.identity(2), Metric.identity(2)
alpha = 1.7
model = H.DoublyAffine(A=alpha, B=0.0)
phi0 = rand_phi(2, rng)
P0 = rng.standard_normal((2, 2))
ps0 = H.phase_state(np.zeros(2), phi0, np.zeros(2), P0)
red0 = TP.reduce(ps0, g, eta)

sys_full = H.hamiltonian_rhs(H.kinetic_phase_function(model, g, eta), 2)
_, yf = integrate_fixed(sys_full.f, H.pack_phase(ps0), 0.0, 1e-3, 1000)
ps1 = sys_full.unpack(yf)
red1 = TP.reduce(ps1, g, eta)

lat = TP.HyperbolicCasimir(alpha=alpha)
red1b = TP.integrate_lattice(lat, red0, 1e-3, 1000)
print("q full:", red1.q, " q red:", red1b.q)
print("p full:", red1.p, " p red:", red1b.p)
assert np.max(np.abs(red1.q - red1b.q)) < 1e-6
assert np.max(np.abs(red1.p - red1b.p)) < 1e-6
print("cross-integration n=2 ok")

# n=3 cross-check too
n = 3
phi0 = rand_phi(3, rng)
P0 = 0.7 * rng.standard_normal((3, 3))
ps0 = H.phase_state(np.zeros(3), phi0, np.zeros(3), P0)
g3 = Metric.identity(3); eta3 = Metric.identity(3)
red0 = TP.reduce(ps0, g3, eta3)
model3 = H.DoublyAffine(A=alpha, B=0.0)
sys_full = H.hamiltonian_rhs(H.kinetic_phase_function(model3, g3, eta3), 3)
_, yf = integrate_fixed(sys_full.f, H.pack_phase(ps0), 0.0, 1e-3, 1000)
red1 = TP.reduce(sys_full.unpack(yf), g3, eta3)
red1b = TP.integrate_lattice(TP.HyperbolicCasimir(alpha=alpha), red0, 1e-3, 1000)
err_q = np.max(np.abs(red1.q - red1b.q))
err_p = np.max(np.abs(red1.p - red1b.p))
err_rho = np.max(np.abs(red1.rho_hat - red1b.rho_hat))
print("n=3 errors:", err_q, err_p, err_rho)
assert err_q < 1e-6 and err_p < 1e-6 and err_rho < 1e-5
print("cross-integration n=3 ok")

# 7. exponential geodesic oracle
n = 3
E = 0.8 * rng.standard_normal((3, 3))
phi0 = rand_phi(3, rng)
body0 = ab.body_state(np.zeros(3), phi0, np.zeros(3), E @ phi0)
ps0 = H.legendre(H.DoublyAffine(A=1.0), body0, g3, eta3)
sys_full = H.hamiltonian_rhs(H.kinetic_phase_function(H.DoublyAffine(A=1.0), g3, eta3), 3)
_, yf = integrate_fixed(sys_full.f, H.pack_phase(ps0), 0.0, 1e-3, 1000)
phi_num = sys_full.unpack(yf).phi_mat
phi_exact = TP.exponential_geodesic(E, phi0, 1.0, side="spatial")
rel = np.linalg.norm(phi_num - phi_exact) / np.linalg.norm(phi_exact)
print("geodesic rel err (dt=1e-3):", rel)
assert rel < 1e-8
print("geodesic ok")

# 8. formalism equivalence: newton vs comoving vs hamiltonian (d'Alembert + hyperelastic)
n = 2
g2, eta2 = rand_metric(2, rng), rand_metric(2, rng)
jm = rng.standard_normal((2, 2)) * 0.2
inert = ab.Inertia(1.4, np.eye(2) + jm @ jm.T)


def u_fun(K):
    return 0.1 * np.sum((K - np.array([2.0, 2.0])) ** 2)


def du_fun(K):
    return 0.2 * (K - np.array([2.0, 2.0]))


tm = ab.HyperelasticInvariant(U=u_fun, grad_U=du_fun)
st0 = ab.body_state([0.1, -0.2], rand_phi(2, rng, 0.2), [0.3, 0.1],
                    0.3 * rng.standard_normal((2, 2)))
sys_n = ab.unconstrained_rhs(inert, tm, g2, eta2)
sys_c = ab.comoving_rhs(inert, tm, g2, eta2)
_, yn = integrate_fixed(sys_n.f, sys_n.pack(st0), 0.0, 1e-3, 1000)
_, yc = integrate_fixed(sys_c.f, sys_c.pack(st0), 0.0, 1e-3, 1000)
stn, stc = sys_n.unpack(yn), sys_c.unpack(yc)
print("newton vs comoving phi err:", np.max(np.abs(stn.phi - stc.phi)))
assert np.max(np.abs(stn.phi - stc.phi)) < 1e-8
assert np.max(np.abs(stn.x - stc.x)) < 1e-8

damodel = H.DAlembert(mass=inert.mass, J=inert.J)
Hfun = H.add_phase_functions(H.kinetic_phase_function(damodel, g2, eta2),
                             H.hyperelastic_phase_potential(u_fun, du_fun, g2, eta2))
sys_h = H.hamiltonian_rhs(Hfun, 2)
ps0 = H.legendre(damodel, st0, g2, eta2)
_, yh = integrate_fixed(sys_h.f, H.pack_phase(ps0), 0.0, 1e-3, 1000)
sth = H.legendre_inverse(damodel, sys_h.unpack(yh), g2, eta2)
print("newton vs hamiltonian phi err:", np.max(np.abs(stn.phi - sth.phi)))
assert np.max(np.abs(stn.phi - sth.phi)) < 1e-8
assert np.max(np.abs(stn.x - sth.x)) < 1e-8
print("formalism equivalence ok")
print("ALL SCRATCH CHECKS PASSED")
