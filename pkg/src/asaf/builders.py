"""Channel matrix builders for the slotted AF protocol family.

========================================================================

All six protocol variants run through one symbol-granularity trace
engine.  Relay buffers are vectors of linear forms over the source
symbols; each transmit slot applies the amplify-and-forward recursion

    s_i = g * (heard source window) + shift(c * s_{i-1}, delta)

and the destination superposes every arrival, delayed by its path.  A
protocol is just a schedule policy: whether relays lock onto their
intended packet (propagation model) or sample their own lagged clock
(slot-offset model), the slot stride (T, or T plus guard padding), the
direct-link term, and which destination instants are recorded:

  sync / prop-naive   every sample between first and last relay arrival
  guard               the T-sample window of each relay arrival
  guard-dl            the T-sample window of each source slot (tau0 shift)
  offset              instant k+T for source symbol k (relayed copies
                      of symbol k all land there, whatever the offsets)
  offset-dl           instant k for source symbol k

Dropping: under the naive protocol colliding arrivals and the corrupted
symbols they induce downstream are identified per slot; retaining the
clean window of every packet plus the matching inputs leaves a square
lower-triangular system with nonzero diagonal.
"""

from __future__ import annotations

from collections import defaultdict

from .core import AsyncModel, DelayProfile, NetworkConfig, validate_config
from .errors import EmptyPlan, ModelMismatch, NotTriangular, ValidationError
from .symbolic import (
    DropPlan,
    MatrixMeta,
    Monomial,
    SymbolicEntry,
    SymbolicMatrix,
    shift_truncate,
    sym_c,
    sym_g,
    sym_g0,
    sym_h,
)

__all__ = [
    "PROTOCOLS",
    "build_sync",
    "build_prop_naive",
    "build_guard",
    "build_guard_dl",
    "build_offset",
    "build_offset_dl",
    "build_direct",
    "build_for_protocol",
    "compute_drop_plan",
    "apply_drop",
]

PROTOCOLS = ("sync", "prop-naive", "guard", "guard-dl", "offset", "offset-dl")

# cfg.model required per protocol tag
PROTOCOL_MODEL = {
    "sync": AsyncModel.SYNCHRONOUS,
    "prop-naive": AsyncModel.PROPAGATION_DELAY,
    "guard": AsyncModel.PROPAGATION_DELAY,
    "guard-dl": AsyncModel.PROPAGATION_DELAY,
    "offset": AsyncModel.SLOT_OFFSET,
    "offset-dl": AsyncModel.SLOT_OFFSET,
}


def _phys(slot: int, n_relays: int) -> int:
    """1-based relay transmitting in a given slot (slots 1 .. M)."""
    return (slot - 1) % n_relays + 1


# ======================================================================
# trace engine
# ======================================================================

def _relay_forms(cfg, dp, locked: bool, n_src: int):
    """Relay buffer contents per transmit slot.

    Returns {slot: [form per buffer position]} where a form maps source
    symbol index -> list of Monomial coefficients.
    """
    N, M, T = cfg.n_relays, cfg.n_slots, cfg.slot_len
    clock = dp.nu if dp.kind == "prop" else dp.tau
    forms = {}
    for s in range(1, M + 1):
        p = _phys(s, N)
        g = Monomial((sym_g(p),))
        cur = []
        for k in range(T):
            idx = (s - 1) * T + k + (0 if locked else clock[p - 1])
            cur.append({idx: [g]} if 0 <= idx < n_src else {})
        if s >= 2 and not cfg.relay_isolated:
            q = _phys(s - 1, N)
            if q != p:  # a relay never hears itself
                delta = clock[q - 1] - clock[p - 1]
                gam = sym_c(q, p)
                for k, prev in enumerate(shift_truncate(forms[s - 1], delta, T, fill=None)):
                    if prev:
                        tgt = cur[k]
                        for col, monos in prev.items():
                            tgt.setdefault(col, []).extend(mn * gam for mn in monos)
        forms[s] = cur
    return forms


def _trace(cfg, dp, protocol: str, sampling: str, slot_stride: int,
           locked: bool, direct: bool) -> SymbolicMatrix:
    N, M, T = cfg.n_relays, cfg.n_slots, cfg.slot_len
    L = slot_stride
    n_src = (M + 1) * T if direct else M * T
    arrival = dp.path_delays()

    forms = _relay_forms(cfg, dp, locked, n_src)

    dest = defaultdict(dict)           # time -> {col: [Monomial, ...]}
    starts = []
    for s in range(1, M + 1):
        p = _phys(s, N)
        start = s * L + arrival[p - 1]
        starts.append(start)
        hsym = sym_h(p)
        for k, form in enumerate(forms[s]):
            if form:
                tgt = dest[start + k]
                for col, monos in form.items():
                    tgt.setdefault(col, []).extend(mn * hsym for mn in monos)
    if direct:
        g0 = Monomial((sym_g0(),))
        tau0 = dp.tau0 if dp.kind == "prop" else 0
        for j in range(M + 1):
            for k in range(T):
                dest[j * L + k + tau0].setdefault(j * T + k, []).append(g0)

    if sampling == "span":
        times = range(min(starts), max(starts) + T)
    elif sampling == "relay-windows":
        times = [s * L + arrival[_phys(s, N) - 1] + k
                 for s in range(1, M + 1) for k in range(T)]
    elif sampling == "source-windows":
        times = [j * L + dp.tau0 + k for j in range(M + 1) for k in range(T)]
    elif sampling == "symbol-locked":
        times = range(T, M * T + T)
    else:                              # "direct-stream"
        times = range((M + 1) * T)

    entries = {}
    for r, t in enumerate(times):
        for col, monos in dest.get(t, {}).items():
            entries[(r, col)] = SymbolicEntry(tuple(monos))

    m = SymbolicMatrix(
        rows=len(list(times)), cols=n_src, entries=entries,
        meta=MatrixMeta(protocol=protocol, cfg=cfg, dp=dp,
                        input_labels=tuple(range(n_src)),
                        output_labels=tuple(times)))
    if sampling != "span" and not m.is_lower_triangular():
        raise NotTriangular(f"{protocol} trace lost triangularity")
    return m


# ======================================================================
# protocol builders
# ======================================================================

def _check(cfg, dp, protocol, *, direct, guard):
    validate_config(cfg, dp)
    if cfg.model is not PROTOCOL_MODEL[protocol]:
        raise ModelMismatch(f"{protocol} needs model {PROTOCOL_MODEL[protocol].value}")
    if cfg.direct_link != direct:
        raise ModelMismatch(f"{protocol} needs direct_link={direct}")
    want = dp.theta if guard else 0
    if cfg.guard_len != want:
        raise ModelMismatch(f"{protocol} needs guard_len={want}, got {cfg.guard_len}")


def build_sync(cfg: NetworkConfig, dp: DelayProfile | None = None) -> SymbolicMatrix:
    """MT x MT matrix of the fully synchronous protocol."""
    if dp is None:
        dp = DelayProfile.zero(cfg.n_relays)
    _check(cfg, dp, "sync", direct=False, guard=False)
    return _trace(cfg, dp, "sync", "span", cfg.slot_len, locked=True, direct=False)


def build_prop_naive(cfg: NetworkConfig, dp: DelayProfile) -> SymbolicMatrix:
    """Naive protocol under propagation delays; destination keeps every
    sample between the first and last relay arrival, so the matrix is
    rectangular in general and collisions show up as multi-packet rows."""
    _check(cfg, dp, "prop-naive", direct=False, guard=False)
    return _trace(cfg, dp, "prop-naive", "span", cfg.slot_len, locked=True, direct=False)


def build_guard(cfg: NetworkConfig, dp: DelayProfile) -> SymbolicMatrix:
    """Guarded protocol: theta zeros pad every slot, the destination
    records exactly each relay's T-sample arrival window.  MT x MT,
    lower triangular, diagonal g_i*h_i throughout."""
    _check(cfg, dp, "guard", direct=False, guard=True)
    return _trace(cfg, dp, "guard", "relay-windows", cfg.slot_len + dp.theta,
                  locked=True, direct=False)


def build_guard_dl(cfg: NetworkConfig, dp: DelayProfile) -> SymbolicMatrix:
    """Guarded protocol with a direct link and isolated relays.  The
    source transmits in all M+1 slots; the destination records the
    T-sample direct arrival of every slot.  (M+1)T square, diagonal g0,
    one relayed entry at most per row."""
    _check(cfg, dp, "guard-dl", direct=True, guard=True)
    return _trace(cfg, dp, "guard-dl", "source-windows", cfg.slot_len + dp.theta,
                  locked=True, direct=True)


def build_offset(cfg: NetworkConfig, dp: DelayProfile) -> SymbolicMatrix:
    """Slot-offset protocol: relay i starts listening tau_i symbols late
    and therefore misses the head of its packet but catches the head of
    the next.  Every relayed copy of source symbol k reaches the
    destination at instant k+T, so the diagonal reads 0, g_i*h_i or
    (g_i*h_i + g_j*h_j) where transmissions overlap."""
    _check(cfg, dp, "offset", direct=False, guard=False)
    return _trace(cfg, dp, "offset", "symbol-locked", cfg.slot_len,
                  locked=False, direct=False)


def build_offset_dl(cfg: NetworkConfig, dp: DelayProfile) -> SymbolicMatrix:
    """Slot-offset protocol with a direct link and isolated relays;
    the source transmits over all M+1 slots and the destination stays
    source-synchronous.  Diagonal g0, relayed band at offset T."""
    _check(cfg, dp, "offset-dl", direct=True, guard=False)
    return _trace(cfg, dp, "offset-dl", "direct-stream", cfg.slot_len,
                  locked=False, direct=True)


def build_direct(cfg: NetworkConfig) -> SymbolicMatrix:
    """Degenerate single Rayleigh link, H = [g0]; calibration baseline."""
    e = SymbolicEntry((Monomial((sym_g0(),)),))
    return SymbolicMatrix(rows=1, cols=1, entries={(0, 0): e},
                          meta=MatrixMeta(protocol="direct", cfg=cfg,
                                          input_labels=(0,), output_labels=(0,)))


_BUILDERS = {
    "sync": build_sync,
    "prop-naive": build_prop_naive,
    "guard": build_guard,
    "guard-dl": build_guard_dl,
    "offset": build_offset,
    "offset-dl": build_offset_dl,
}


def build_for_protocol(protocol: str, cfg: NetworkConfig, dp: DelayProfile) -> SymbolicMatrix:
    if protocol == "direct":
        return build_direct(cfg)
    if protocol not in _BUILDERS:
        raise ValidationError(f"unknown protocol {protocol!r}")
    return _BUILDERS[protocol](cfg, dp)


# ======================================================================
# collision dropping (naive protocol analysis)
# ======================================================================

def compute_drop_plan(cfg: NetworkConfig, dp: DelayProfile) -> DropPlan:
    """Clean-window retention plan for the naive protocol.

    Per delivered packet, drops the head/tail samples that collide with
    the neighboring arrivals plus the samples whose chained interference
    references a symbol already dropped upstream (corruption inherited
    through relay reception).  Keeps the matching source symbols, which
    is exactly what leaves a square triangular system.
    """
    validate_config(cfg, dp)
    if dp.kind != "prop":
        raise ModelMismatch("drop plans apply to the propagation-delay model")
    x = cfg.guard_len
    if not 0 <= x <= dp.theta:
        raise ValidationError(f"guard_len must lie in [0, theta], got {x}")

    N, M, T = cfg.n_relays, cfg.n_slots, cfg.slot_len
    L = T + x
    arrival = dp.path_delays()
    starts = [s * L + arrival[_phys(s, N) - 1] for s in range(1, M + 1)]

    covered = defaultdict(int)
    for st in starts:
        for t in range(st, st + T):
            covered[t] += 1

    clean = {}
    for s in range(1, M + 1):
        st = starts[s - 1]
        keep = {k for k in range(T) if covered[st + k] == 1}
        p, q = _phys(s, N), _phys(s - 1, N)
        if s >= 2 and not cfg.relay_isolated and q != p:
            delta = dp.nu[q - 1] - dp.nu[p - 1]
            keep = {k for k in keep
                    if not 0 <= k - delta < T or (k - delta) in clean[s - 1]}
        if not keep:
            raise EmptyPlan(f"slot {s} retains no clean symbols (T={T}, theta={dp.theta})")
        clean[s] = keep

    t_first = min(starts)
    rows, cols = [], []
    for s in range(1, M + 1):
        for k in sorted(clean[s]):
            rows.append(starts[s - 1] + k - t_first)
            cols.append((s - 1) * T + k)
    return DropPlan(keep_outputs=tuple(rows), keep_inputs=tuple(cols))


def apply_drop(m: SymbolicMatrix, plan: DropPlan) -> SymbolicMatrix:
    """Restrict to the plan's rows and columns; the result must come out
    square lower triangular with a fully nonzero diagonal, anything else
    means the plan was built against the wrong matrix."""
    keep_in = set(plan.keep_inputs)
    row_pos = {r: i for i, r in enumerate(plan.keep_outputs)}
    col_pos = {c: i for i, c in enumerate(plan.keep_inputs)}

    entries = {}
    for (r, c), e in m.entries.items():
        if r in row_pos:
            if c not in keep_in:
                raise NotTriangular(f"kept row {r} touches dropped input {c}")
            entries[(row_pos[r], col_pos[c])] = e

    n = len(plan.keep_outputs)
    for i in range(n):
        if (i, i) not in entries:
            raise NotTriangular(f"dropped system has an empty diagonal at {i}")
    sub = SymbolicMatrix(
        rows=n, cols=n, entries=entries,
        meta=MatrixMeta(protocol=m.meta.protocol + "+drop", cfg=m.meta.cfg, dp=m.meta.dp,
                        input_labels=tuple(m.meta.input_labels[c] for c in plan.keep_inputs),
                        output_labels=tuple(m.meta.output_labels[r] for r in plan.keep_outputs)))
    if not sub.is_lower_triangular():
        raise NotTriangular("dropped system is not lower triangular")
    return sub
