"""Pure numpy multi-commodity CTM relaxation (fallback for ``_ckernel``).

All batch members are stepped together; a member stops changing once its
largest per-step density change drops below ``tol``.
"""

import numpy as np


def relax(cap, jam, vf, w, length, nxt, first, nominal, dt, tol, max_steps):
    """Integrate every demand vector in ``nominal`` to a steady state.

    Args:
        cap, jam, vf, w, length: per-link arrays of shape ``(L,)``.
        nxt: ``(L, R)`` index of the link following ``l`` on route ``r``;
            ``-1`` when ``l`` is the route's last link, ``-2`` when the route
            does not use ``l``.
        first: ``(R,)`` first link of each route.
        nominal: ``(B, R)`` flow offered to each route at the origin.

    Returns:
        ``(x, out, admitted, steps, converged)`` with per-route densities and
        outflows of shape ``(B, L, R)``, admitted origin flows ``(B, R)``,
        steps taken ``(B,)`` and a convergence mask ``(B,)``.
    """
    cap, jam, vf, w, length = (np.asarray(a, dtype=float) for a in (cap, jam, vf, w, length))
    nxt = np.asarray(nxt, dtype=np.int64)
    first = np.asarray(first, dtype=np.int64)
    nominal = np.atleast_2d(np.asarray(nominal, dtype=float))
    nb, (nl, nr) = nominal.shape[0], nxt.shape

    uses = nxt != -2
    inner = nxt >= 0
    l_idx, r_idx = np.nonzero(inner)
    m_idx = nxt[l_idx, r_idx]
    scale = dt / length[None, :, None]

    x = np.zeros((nb, nl, nr))
    out = np.zeros((nb, nl, nr))
    admitted = np.zeros((nb, nr))
    steps = np.full(nb, max_steps, dtype=np.int64)
    active = np.ones(nb, dtype=bool)
    for step in range(max_steps):
        xa = x[active]
        tot = xa.sum(axis=2)
        dem = np.minimum(vf * tot, cap)
        sup = np.clip(w * (jam - tot), 0.0, cap)
        share = np.divide(xa, tot[:, :, None], out=np.zeros_like(xa), where=tot[:, :, None] > 0)
        d = dem[:, :, None] * share * uses
        req = np.zeros_like(tot)
        np.add.at(req, (slice(None), m_idx), d[:, l_idx, r_idx])
        nom = nominal[active]
        np.add.at(req, (slice(None), first), nom)
        ratio = np.where(req > sup, np.divide(sup, req, out=np.ones_like(req), where=req > 0), 1.0)
        o = d.copy()
        o[:, l_idx, r_idx] *= ratio[:, m_idx]
        inn = np.zeros_like(xa)
        np.add.at(inn, (slice(None), m_idx, r_idx), o[:, l_idx, r_idx])
        adm = nom * ratio[:, first]
        np.add.at(inn, (slice(None), first, np.arange(nr)), adm)
        dx = scale * (inn - o)
        x[active] = np.maximum(xa + dx, 0.0)
        out[active] = o
        admitted[active] = adm
        delta = (np.abs(dx) / jam[None, :, None]).max(axis=(1, 2))
        idx = np.flatnonzero(active)
        finished = idx[delta < tol]
        steps[finished] = step + 1
        active[finished] = False
        if not active.any():
            break
    return x, out, admitted, steps, ~active
