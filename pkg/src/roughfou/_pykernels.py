"""Pure-Python/numpy implementations of the hot loops.

Used when the compiled ``_ckernels`` extension is unavailable. ``euler_path``
performs exactly the same floating-point operations as the compiled version.
"""
import numpy as np


def euler_path(gamma, x0, noise, h):
    """Euler recursion ``x_{l+1} = x_l - (gamma @ x_l) h + noise[:, l]``; returns ``(d, n+1)``."""
    g = np.asarray(gamma, dtype=float).tolist()
    d = len(g)
    steps = np.asarray(noise, dtype=float).T.tolist()
    x = [float(v) for v in x0]
    rows = [x]
    if d == 1:
        g0 = g[0][0]
        x0_ = x[0]
        out = [x0_]
        for (dn,) in steps:
            x0_ = x0_ - (0.0 + g0 * x0_) * h + dn
            out.append(x0_)
        return np.array([out])
    for dn in steps:
        new = []
        for i in range(d):
            gi = g[i]
            acc = 0.0
            for j in range(d):
                acc = acc + gi[j] * x[j]
            new.append(x[i] - acc * h + dn[i])
        x = new
        rows.append(x)
    return np.array(rows).T.copy()


def pvar_level1(xa, xb, q):
    """Grid supremum over partitions of ``sum |(xa - xb)_{t_i, t_j}|^q``; paths are ``(m, d)``."""
    m = xa.shape[0]
    best = np.zeros(m)
    for j in range(1, m):
        diff = (xa[j] - xa[:j]) - (xb[j] - xb[:j])
        cand = best[:j] + np.sqrt(np.sum(diff * diff, axis=1)) ** q
        best[j] = cand.max()
    return float(best[-1])


def pvar_level2(xa, ra, xb, rb, q):
    """Same as :func:`pvar_level1` for second levels rebuilt from running areas ``(m, d, d)``."""
    m = xa.shape[0]
    best = np.zeros(m)
    pa = xa - xa[0]
    pb = xb - xb[0]
    for j in range(1, m):
        ea = ra[j] - ra[:j] - pa[:j, :, None] * (xa[j] - xa[:j])[:, None, :]
        eb = rb[j] - rb[:j] - pb[:j, :, None] * (xb[j] - xb[:j])[:, None, :]
        diff = (ea - eb).reshape(j, -1)
        cand = best[:j] + np.sqrt(np.sum(diff * diff, axis=1)) ** q
        best[j] = cand.max()
    return float(best[-1])
