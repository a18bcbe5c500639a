"""Independent reference values for the truncated Kendall-tau bridge.

Conditions on the first draw of the pair and integrates the conditional
concordance sign over the second draw with scipy's bivariate normal cdf.
Shares no code with the package.  Run as a script to regenerate
``bridge_values.json``.
"""
import itertools
import json
from pathlib import Path

import numpy as np
from scipy.stats import multivariate_normal, norm

R_GRID = (-0.9, -0.5, 0.0, 0.5, 0.7, 0.9)
ZERO_GRID = (0.0, 0.25, 0.5)
HI = 8.5


def _gl(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def tau_reference(r, zj, zk, n=240):
    d1 = norm.ppf(zj) if zj > 0 else -np.inf
    d2 = norm.ppf(zk) if zk > 0 else -np.inf
    cov = [[1, r], [r, 1]]

    def phi2(a, b):
        a = np.broadcast_to(a, np.broadcast(a, b).shape)
        b = np.broadcast_to(b, a.shape)
        pts = np.stack([a.ravel(), b.ravel()], axis=1)
        return np.asarray(multivariate_normal.cdf(pts, mean=[0, 0], cov=cov, abseps=1e-10, releps=1e-10)).reshape(a.shape)

    s = np.sqrt(1 - r * r)
    lo1 = max(d1, -HI)
    lo2 = max(d2, -HI)
    total = 0.0
    # first draw observed in both coordinates
    a, wa = _gl(lo1, HI, n)
    b, wb = _gl(lo2, HI, n)
    A, B = np.meshgrid(a, b, indexing="ij")
    dens = np.exp(-(A * A - 2 * r * A * B + B * B) / (2 * s * s)) / (2 * np.pi * s)
    F = phi2(A, B)
    Pa, Pb = norm.cdf(A), norm.cdf(B)
    ll = F
    uu = 1 - Pa - Pb + F
    lu = Pa - F
    ul = Pb - F
    total += np.einsum("i,j,ij->", wa, wb, dens * (ll + uu - lu - ul))
    # first coordinate truncated, second observed
    if np.isfinite(d1):
        b, wb = _gl(lo2, HI, n)
        w_cond = norm.cdf((d1 - r * b) / s) * norm.pdf(b)
        up = 1 - norm.cdf(d1) - norm.cdf(b) + phi2(d1, b)
        down = norm.cdf(b) - phi2(d1, b)
        total += np.sum(wb * w_cond * (up - down))
    if np.isfinite(d2):
        a, wa = _gl(lo1, HI, n)
        w_cond = norm.cdf((d2 - r * a) / s) * norm.pdf(a)
        up = 1 - norm.cdf(d2) - norm.cdf(a) + phi2(a, d2)
        down = norm.cdf(a) - phi2(a, d2)
        total += np.sum(wa * w_cond * (up - down))
    if np.isfinite(d1) and np.isfinite(d2):
        p_both = phi2(d1, d2)
        total += p_both * (1 - norm.cdf(d1) - norm.cdf(d2) + phi2(d1, d2))
    return float(total)


if __name__ == "__main__":
    rows = []
    for r, zj, zk in itertools.product(R_GRID, ZERO_GRID, ZERO_GRID):
        rows.append({"r": r, "zj": zj, "zk": zk, "tau": tau_reference(r, zj, zk)})
        print(rows[-1], flush=True)
    out = Path(__file__).with_name("bridge_values.json")
    out.write_text(json.dumps(rows, indent=1) + "\n")
