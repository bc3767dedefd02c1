import numpy as np
import affinebody as ab
from affinebody.engine import ConstraintKind
from affinebody.integrate import integrate_fixed
from affinebody.tensors import Metric

rng = np.random.default_rng(7)


def rand_metric(n, rng):
    a = rng.standard_normal((n, n)) * 0.3
    return Metric(np.eye(n) + a @ a.T)


def rand_phi(n, rng, scale=0.4):
    while True:
        p = np.eye(n) + scale * rng.standard_normal((n, n))
        if np.linalg.det(p) > 0.3:
            return p


n = 2
g, eta = rand_metric(n, rng), rand_metric(n, rng)
jm = rng.standard_normal((n, n)) * 0.2
inert = ab.Inertia(1.0, np.eye(n) + jm @ jm.T)


def u_fun(K):
    return 0.3 * float(np.sum((K - np.trace(eta.inv @ eta.mat) * np.ones(n)) ** 2))


def du_fun(K):
    return 0.6 * (K - np.trace(eta.inv @ eta.mat) * np.ones(n))


tm = ab.HyperelasticInvariant(U=u_fun, grad_U=du_fun)

# --- gyroscopic: build isometry via polar projection, antisym velocity
phi_raw = rand_phi(n, rng)
f = ab.two_polar(phi_raw, g, eta)
phi0 = f.L @ f.R.T @ eta.mat  # exact isometry
w = rng.standard_normal((n, n))
omega0 = 0.5 * (w - g.inv @ w.T @ g.mat)  # g-antisym
st0 = ab.body_state(np.zeros(n), phi0, np.zeros(n), omega0 @ phi0)
sys_g = ab.constrained_rhs(ConstraintKind.GYROSCOPIC, inert, tm, g, eta)
sys_g.check_initial(st0)


def post(t, y):
    return sys_g.stabilize(y)


resids = []
energies = []


def obs(i, t, y):
    st = sys_g.unpack(y)
    resids.append(np.max(np.abs(sys_g.constraint_residual(st))))
    energies.append(sys_g.monitors["energy"](t, st))


_, yf = integrate_fixed(sys_g.f, sys_g.pack(st0), 0.0, 1e-3, 10000, post_step=post, observer=obs)
print("gyroscopic max residual:", max(resids))
print("gyroscopic energy drift:", max(abs(e - energies[0]) for e in energies))
assert max(resids) < 1e-8

# spin balance: with symmetric torque, spin 𝒮 constant along gyroscopic flow
st = sys_g.unpack(yf)
km0 = ab.kinematical_momenta(st0, inert, g)
km1 = ab.kinematical_momenta(st, inert, g)
print("gyro spin drift:", np.max(np.abs(km1.S - km0.S)))
assert np.max(np.abs(km1.S - km0.S)) < 1e-6

# --- isochoric
phi0 = rand_phi(n, rng)
target = np.sqrt(np.linalg.det(eta.mat) / np.linalg.det(g.mat))
phi0 = phi0 * (target / np.linalg.det(phi0)) ** (1.0 / n)
w = rng.standard_normal((n, n))
w -= np.trace(w) / n * np.eye(n)  # traceless Omega
st0 = ab.body_state(np.zeros(n), phi0, np.zeros(n), w @ phi0)
sys_i = ab.constrained_rhs(ConstraintKind.ISOCHORIC, inert, tm, g, eta)
sys_i.check_initial(st0)
dets = []


def obs_i(i, t, y):
    st = sys_i.unpack(y)
    dets.append(abs(np.linalg.det(st.phi) - target))


_, yf = integrate_fixed(sys_i.f, sys_i.pack(st0), 0.0, 1e-3, 10000,
                        post_step=lambda t, y: sys_i.stabilize(y), observer=obs_i)
print("isochoric max |det - target|:", max(dets))
assert max(dets) < 1e-10

# --- rotation-free spatial
phi0 = rand_phi(n, rng)
w = rng.standard_normal((n, n))
omega0 = 0.5 * (w + g.inv @ w.T @ g.mat)  # g-symmetric
st0 = ab.body_state(np.zeros(n), phi0, np.zeros(n), omega0 @ phi0)
sys_r = ab.constrained_rhs(ConstraintKind.ROTATION_FREE_SPATIAL, inert, tm, g, eta)
sys_r.check_initial(st0)
asym = []
asym_eta = []


def obs_r(i, t, y):
    st = sys_r.unpack(y)
    om = st.phidot @ np.linalg.inv(st.phi)
    omh = np.linalg.inv(st.phi) @ st.phidot
    G = st.phi.T @ g.mat @ st.phi
    asym.append(np.max(np.abs(om - g.transpose(om))))
    asym_eta.append(np.max(np.abs(omh - eta.transpose(omh))))
    # G-symmetry check
    Gm = Metric(G)
    err_G = np.max(np.abs(omh - Gm.transpose(omh)))
    if i == 5000:
        print("  rfs: ||Omh - G-transp|| =", err_G, " ||Omh - eta-transp|| =", asym_eta[-1])


_, yf = integrate_fixed(sys_r.f, sys_r.pack(st0), 0.0, 1e-3, 10000,
                        post_step=lambda t, y: sys_r.stabilize(y), observer=obs_r)
print("rotation-free spatial: max g-antisym part:", max(asym), " eta-asym (should be >1e-3):", max(asym_eta))
assert max(asym) < 1e-8
assert max(asym_eta) > 1e-3

# --- rotation-free material (short horizon: purely deformative motion can
# approach the singular set)
phi0 = rand_phi(n, rng)
w = 0.3 * rng.standard_normal((n, n))
omh0 = 0.5 * (w + eta.inv @ w.T @ eta.mat)  # eta-symmetric
st0 = ab.body_state(np.zeros(n), phi0, np.zeros(n), phi0 @ omh0)
sys_m = ab.constrained_rhs(ConstraintKind.ROTATION_FREE_MATERIAL, inert, tm, g, eta)
sys_m.check_initial(st0)
bad = []


def obs_m(i, t, y):
    st = sys_m.unpack(y)
    omh = np.linalg.inv(st.phi) @ st.phidot
    bad.append(np.max(np.abs(omh - eta.transpose(omh))))


_, yf = integrate_fixed(sys_m.f, sys_m.pack(st0), 0.0, 1e-3, 1500,
                        post_step=lambda t, y: sys_m.stabilize(y), observer=obs_m)
print("rotation-free material: max eta-antisym part:", max(bad))
assert max(bad) < 1e-8

# --- dilatational: lambda linear when g N = 0 traceless... with zero torque
phi_iso = ab.two_polar(rand_phi(n, rng), g, eta)
psi = phi_iso.L @ phi_iso.R.T @ eta.mat
lam0, lamdot0 = 1.3, 0.4
st0 = ab.body_state(np.zeros(n), lam0 * psi, np.zeros(n), lamdot0 * psi)
zero_t = ab.Sum(())
sys_d = ab.constrained_rhs(ConstraintKind.DILATATIONAL, inert, zero_t, g, eta)
sys_d.check_initial(st0)
lams = []


def obs_d(i, t, y):
    st = sys_d.unpack(y)
    lams.append((t, np.linalg.det(st.phi) ** (1 / n) * (np.linalg.det(g.mat) / np.linalg.det(eta.mat)) ** (1 / (2 * n))))


_, yf = integrate_fixed(sys_d.f, sys_d.pack(st0), 0.0, 1e-3, 2000,
                        post_step=lambda t, y: sys_d.stabilize(y), observer=obs_d)
t_last, lam_last = lams[-1]
print("dilatational: lambda(2) =", lam_last, " expected", lam0 + lamdot0 * t_last)
assert abs(lam_last - (lam0 + lamdot0 * t_last)) < 1e-8

# --- shape-preserving: energy conservation + manifold
w = rng.standard_normal((n, n))
omega0 = 0.5 * (w - g.inv @ w.T @ g.mat) + 0.35 * np.eye(n)
st0 = ab.body_state(np.zeros(n), 1.2 * psi, np.zeros(n), omega0 @ (1.2 * psi))
sys_s = ab.constrained_rhs(ConstraintKind.SHAPE_PRESERVING, inert, tm, g, eta)
sys_s.check_initial(st0)
res_s = []
en_s = []


def obs_s(i, t, y):
    st = sys_s.unpack(y)
    res_s.append(np.max(np.abs(sys_s.constraint_residual(st))))
    en_s.append(sys_s.monitors["energy"](t, st))


_, yf = integrate_fixed(sys_s.f, sys_s.pack(st0), 0.0, 1e-3, 5000,
                        post_step=lambda t, y: sys_s.stabilize(y), observer=obs_s)
print("shape-preserving: residual", max(res_s), " energy drift", max(abs(e - en_s[0]) for e in en_s))
assert max(res_s) < 1e-8

# --- energy conservation and spin conservation, unconstrained potential model
st0 = ab.body_state([0.1, 0.2], rand_phi(n, rng, 0.25), [0.05, -0.1],
                    0.4 * rng.standard_normal((n, n)))
sys_u = ab.unconstrained_rhs(inert, tm, g, eta)
en, sp = [], []


def obs_u(i, t, y):
    st = sys_u.unpack(y)
    en.append(sys_u.monitors["energy"](t, st))
    km = ab.kinematical_momenta(st, inert, g)
    sp.append(km.S.copy())


_, yf = integrate_fixed(sys_u.f, sys_u.pack(st0), 0.0, 1e-3, 10000, observer=obs_u)
drift_e = max(abs(e - en[0]) for e in en) / max(1.0, abs(en[0]))
drift_s = max(np.max(np.abs(s - sp[0])) for s in sp)
print("unconstrained: energy drift", drift_e, " spin drift", drift_s)
assert drift_e < 1e-6
assert drift_s < 1e-8

# --- dissipative: energy non-increasing, dE/dt = P
tm_diss = ab.Sum((ab.ViscousDiscrete(alpha=0.5, beta=0.3),
                  ab.ExternalFriction(alpha=0.2, beta=0.4, gamma=0.3)))
st0 = ab.body_state(np.zeros(n), rand_phi(n, rng, 0.25), np.zeros(n),
                    0.5 * rng.standard_normal((n, n)))
sys_v = ab.unconstrained_rhs(inert, tm_diss, g, eta)
ts, es, ps = [], [], []


def obs_v(i, t, y):
    st = sys_v.unpack(y)
    ts.append(t)
    es.append(sys_v.monitors["energy"](t, st))
    ps.append(sys_v.monitors["power_dissipative"](t, st))


_, yf = integrate_fixed(sys_v.f, sys_v.pack(st0), 0.0, 1e-4, 2000, observer=obs_v)
es = np.array(es); ps = np.array(ps); ts = np.array(ts)
assert np.all(np.diff(es) <= 1e-14), "energy must be non-increasing"
dEdt = (es[2:] - es[:-2]) / (ts[2:] - ts[:-2])
err = np.max(np.abs(dEdt - ps[1:-1]))
print("dissipative: max |dE/dt - P| =", err)
assert err < 1e-6
assert np.all(ps <= 1e-14)

print("ALL CONSTRAINT CHECKS PASSED")
