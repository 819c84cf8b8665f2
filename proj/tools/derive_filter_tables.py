#!/usr/bin/env python3
"""Regenerate the coefficient tables under data/wavelets/.

bior3.7 is copied from PyWavelets. The published 62-tap discrete Meyer table
is only approximately orthonormal (sum h^2 = 1.0022), so it is replaced by the
nearest 62-tap filter satisfying the orthonormality conditions
sum_k h[k] h[k+2m] = delta(m) and sum_k h[k] = sqrt(2).
"""
import pathlib
import sys

import numpy as np
import pywt
from scipy.optimize import minimize

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/wavelets")


def orthonormal_fit(target):
    n = len(target)

    def constraints(h):
        eqs = [np.dot(h[: n - 2 * m], h[2 * m:]) - (1.0 if m == 0 else 0.0)
               for m in range(n // 2)]
        eqs.append(h.sum() - np.sqrt(2.0))
        return np.array(eqs)

    res = minimize(lambda h: np.sum((h - target) ** 2), target,
                   jac=lambda h: 2 * (h - target),
                   constraints=[{"type": "eq", "fun": constraints}],
                   method="SLSQP", options={"ftol": 1e-30, "maxiter": 1000})
    h = res.x
    # Newton polish on the constraint manifold.
    for _ in range(20):
        c = constraints(h)
        jac = np.empty((len(c), n))
        for m in range(n // 2):
            row = np.zeros(n)
            row[: n - 2 * m] += h[2 * m:]
            row[2 * m:] += h[: n - 2 * m]
            jac[m] = row
        jac[-1] = 1.0
        h = h - np.linalg.lstsq(jac, c, rcond=None)[0]
    return h


def qmf(rec_lo):
    # dec_hi[k] = (-1)^(k+1) rec_lo[k] reversed-order convention used by PyWavelets
    rec_lo = np.asarray(rec_lo)
    dec_lo = rec_lo[::-1]
    rec_hi = np.array([(-1) ** k * dec_lo[k] for k in range(len(dec_lo))])
    dec_hi = rec_hi[::-1]
    return dec_lo, dec_hi, rec_lo, rec_hi


def write(bank, filters):
    d = OUT / bank
    d.mkdir(parents=True, exist_ok=True)
    for name, coeffs in zip(("dec_lo", "dec_hi", "rec_lo", "rec_hi"), filters):
        (d / f"{name}.txt").write_text("".join(f"{c:.17g}\n" for c in coeffs))


meyer = pywt.Wavelet("dmey")
h = orthonormal_fit(np.array(meyer.dec_lo))
print("dmey max deviation from published table:", np.abs(h - meyer.dec_lo).max())
write("dmey", qmf(h[::-1]))

b = pywt.Wavelet("bior3.7")
write("bior3.7", (b.dec_lo, b.dec_hi, b.rec_lo, b.rec_hi))
