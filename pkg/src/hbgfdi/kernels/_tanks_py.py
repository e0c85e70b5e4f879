"""Pure-Python kernels (fallback when the compiled extension is unavailable)."""
import math

import numpy as np


def _rhs(h1, h2, h3, p, q1, q2, th1, th2):
    C1, C2, C3, R1, R12, R23, R2 = p
    a1 = 1.0 if (h1 >= th1 or h2 >= th1) else 0.0
    a2 = 1.0 if (h2 >= th2 or h3 >= th2) else 0.0
    q12 = a1 / R12 * (max(h1, th1) - max(h2, th1))
    q23 = a2 / R23 * (max(h2, th2) - max(h3, th2))
    return (
        (q1 - h1 / R1 - q12) / C1,
        (q12 - q23) / C2,
        (q23 + q2 - h3 / R2) / C3,
    )


def integrate_tanks(h0, params, inputs, ts, thresholds):
    """Classical RK4 over ``n`` steps.

    params: (n, 3, 7) values of (C1, C2, C3, R1, R12, R23, R2) at the start,
    midpoint and end of each step. inputs: (n, 2) pump flows held over each
    step. Returns (levels (n+1, 3), modes (n+1, 2), failed_step or -1).
    """
    params = np.asarray(params, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    n = inputs.shape[0]
    th1, th2 = float(thresholds[0]), float(thresholds[1])
    out = np.zeros((n + 1, 3))
    modes = np.zeros((n + 1, 2), dtype=np.uint8)
    h1, h2, h3 = (float(x) for x in h0)
    out[0] = (h1, h2, h3)
    failed = -1
    for k in range(n):
        q1, q2 = inputs[k, 0], inputs[k, 1]
        p0, pm, pe = params[k, 0], params[k, 1], params[k, 2]
        k1 = _rhs(h1, h2, h3, p0, q1, q2, th1, th2)
        k2 = _rhs(h1 + 0.5 * ts * k1[0], h2 + 0.5 * ts * k1[1], h3 + 0.5 * ts * k1[2], pm, q1, q2, th1, th2)
        k3 = _rhs(h1 + 0.5 * ts * k2[0], h2 + 0.5 * ts * k2[1], h3 + 0.5 * ts * k2[2], pm, q1, q2, th1, th2)
        k4 = _rhs(h1 + ts * k3[0], h2 + ts * k3[1], h3 + ts * k3[2], pe, q1, q2, th1, th2)
        h1 += ts / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        h2 += ts / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        h3 += ts / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (math.isfinite(h1) and math.isfinite(h2) and math.isfinite(h3)):
            failed = k
            break
        out[k + 1] = (h1, h2, h3)
    for k in range(n + 1):
        modes[k, 0] = out[k, 0] >= th1 or out[k, 1] >= th1
        modes[k, 1] = out[k, 1] >= th2 or out[k, 2] >= th2
    return out, modes, failed


def persistence_mask(exceed, window):
    """Bit (k, i) is set when column i exceeded for ``window`` samples ending at k."""
    exceed = np.asarray(exceed, dtype=np.uint8)
    n, m = exceed.shape
    out = np.zeros((n, m), dtype=np.uint8)
    for i in range(m):
        run = 0
        for k in range(n):
            run = run + 1 if exceed[k, i] else 0
            out[k, i] = run >= window
    return out
