"""Reference solution of the semi-discrete system with an implicit ODE integrator.

Written independently of leaf_uptake.solver: the cuticle is a ghost-node
finite-difference grid and time integration is left to scipy's Radau method.
"""

import numpy as np
from scipy.integrate import solve_ivp


def _compound_rhs(y, d_elem, p, A, V_A, V_B, h):
    """Time derivative of (c_drop, m_0..m_N, c_leaf, lost) for one compound."""
    c, m, cl = y[0], y[1:-2], y[-2]
    j_in = p.s_in * (A * c - p.k_in * m[0])
    j_out = p.s_out * (p.k_out * m[-1] - A * cl)
    grad = d_elem * np.diff(m) / h

    dm = np.empty_like(m)
    dm[1:-1] = (grad[1:] - grad[:-1]) / h
    # ghost nodes carry the boundary flux into the half cell
    dm[0] = 2.0 * (j_in + grad[0]) / h
    dm[-1] = 2.0 * (-grad[-1] - j_out) / h

    out = np.empty_like(y)
    out[0] = -j_in / V_A
    out[1:-2] = dm
    out[-2] = (j_out - p.loss * V_B * cl) / V_B
    out[-1] = p.loss * V_B * cl
    return out


def reference_percentages(geom, aj, ai, d0, alpha, sigma, n_cells, t_end):
    """
    Percentages (droplet, cuticle, leaf, rest) of AJ and AI at ``t_end``.

    Returns:
        Tuple of two length-4 arrays (AJ, AI)
    """
    h = geom.L / n_cells
    n = n_cells + 1
    size = n + 3

    def rhs(t, y):
        y_aj, y_ai = y[:size], y[size:]
        m_aj = np.maximum(y_aj[1:-2], 0.0)
        m_elem = 0.5 * (m_aj[:-1] + m_aj[1:])
        d_ai = d0 * (1.0 + alpha * m_elem / (sigma + m_elem))
        return np.concatenate([
            _compound_rhs(y_aj, aj.D, aj, geom.A, geom.V_A, geom.V_B, h),
            _compound_rhs(y_ai, d_ai, ai, geom.A, geom.V_A, geom.V_B, h),
        ])

    y0 = np.zeros(2 * size)
    y0[0] = aj.c0
    y0[size] = ai.c0
    sol = solve_ivp(rhs, (0.0, t_end), y0, t_eval=[t_end], method="Radau", rtol=1e-10, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)

    weights = np.full(n, h)
    weights[0] = weights[-1] = h / 2.0
    result = []
    for offset, p in ((0, aj), (size, ai)):
        y = sol.y[offset:offset + size, -1]
        amounts = np.array([geom.V_A * y[0], weights @ y[1:-2], geom.V_B * y[-2], y[-1]])
        result.append(100.0 * amounts / (geom.V_A * p.c0))
    return tuple(result)
