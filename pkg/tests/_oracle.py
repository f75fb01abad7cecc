"""Independent numeric oracle for the protocol builders.

Simulates the network sample-by-sample on a global clock: every relay
buffer entry is a complex coefficient vector over the source symbols,
filled by literally replaying the listen/forward schedule with the
drawn fade values.  No symbolic machinery is shared with the package;
agreement between ``oracle_matrix`` and an evaluated builder output is
therefore evidence for both.

Timing reading, common to both asynchronism models: a relay runs its
slot boundaries on its own clock (shifted by nu_i under propagation
delay, tau_i under slot offset), listens for one slot, forwards the
buffer in the next, and its samples reach the destination tau_i after
emission relative to the source's slot grid.
"""

import numpy as np


def _phys(slot: int, n_relays: int) -> int:
    """1-based relay scheduled in 1-based slot."""
    return (slot - 1) % n_relays + 1


def _timing(protocol, cfg, dp):
    """(slot stride L, per-relay clock shift, heard-index shift, tau)."""
    n = cfg.n_relays
    if protocol in ("offset", "offset-dl"):
        tau = list(dp.tau)
        return cfg.slot_len, tau, tau, tau
    clock = list(dp.nu)
    tau = [a + b for a, b in zip(dp.nu, dp.pi)]
    stride = cfg.slot_len + (cfg.guard_len if protocol in ("guard", "guard-dl") else 0)
    return stride, clock, [0] * n, tau


def _dest_times(protocol, cfg, dp, arrivals):
    """Row sample times per destination policy; arrivals: {slot: t_start}."""
    M, T = cfg.n_slots, cfg.slot_len
    L = T + cfg.guard_len if protocol in ("guard", "guard-dl") else T
    if protocol in ("sync", "prop-naive"):
        lo = min(arrivals.values())
        hi = max(arrivals.values()) + T - 1
        return list(range(lo, hi + 1))
    if protocol == "guard":
        times = []
        for s in sorted(arrivals):
            times.extend(range(arrivals[s], arrivals[s] + T))
        return sorted(times)
    if protocol == "guard-dl":
        tau0 = dp.tau0
        times = []
        for j in range(M + 1):
            times.extend(range(j * L + tau0, j * L + tau0 + T))
        return times
    if protocol == "offset":
        return list(range(T, (M + 1) * T))
    if protocol == "offset-dl":
        return list(range(0, (M + 1) * T))
    raise ValueError(protocol)


def oracle_matrix(protocol, cfg, dp, fades):
    """(row_times, H) replayed on the global clock for one fade draw."""
    N, M, T = cfg.n_relays, cfg.n_slots, cfg.slot_len
    n_in = (M + 1) * T if protocol in ("guard-dl", "offset-dl") else M * T
    n_src = (M + 1) * T if protocol in ("guard-dl", "offset-dl") else M * T
    L, clock, heard_shift, tau = _timing(protocol, cfg, dp)
    g0, g, h = fades.g0, fades.g, fades.h
    c = fades.gamma_inter

    # relay buffers: buf[s][m] is a coefficient row over source symbols
    buf = {}
    for s in range(1, M + 1):
        p = _phys(s, N)
        rows = np.zeros((T, n_in), dtype=np.complex128)
        for m in range(T):
            src = (s - 1) * T + heard_shift[p - 1] + m
            if 0 <= src < n_src:
                rows[m, src] += g[p - 1]
            if s >= 2 and not cfg.relay_isolated:
                q = _phys(s - 1, N)
                if q != p:                     # a relay never hears itself
                    # q emits buffer sample b at its clock nu_q + b; p's
                    # listen position m sits at nu_p + m on the same grid
                    ref = m - (clock[q - 1] - clock[p - 1])
                    if 0 <= ref < T:
                        rows[m] += c[q - 1, p - 1] * buf[s - 1][ref]
        buf[s] = rows

    # destination stream: everything landing at each global sample time
    dest = {}

    def add(t, vec):
        if t in dest:
            dest[t] = dest[t] + vec
        else:
            dest[t] = vec.copy()

    arrivals = {}
    for s in range(1, M + 1):
        p = _phys(s, N)
        t0 = s * L + tau[p - 1]
        arrivals[s] = t0
        for m in range(T):
            add(t0 + m, h[p - 1] * buf[s][m])
    if cfg.direct_link:
        tau0 = dp.tau0 if protocol == "guard-dl" else 0
        n_slots_src = M + 1 if protocol in ("guard-dl", "offset-dl") else M
        for j in range(n_slots_src):
            for k in range(T):
                e = np.zeros(n_in, dtype=np.complex128)
                e[j * T + k] = g0
                add(j * L + k + tau0, e)

    times = _dest_times(protocol, cfg, dp, arrivals)
    H = np.zeros((len(times), n_in), dtype=np.complex128)
    for r, t in enumerate(times):
        if t in dest:
            H[r] = dest[t]
    return times, H
