"""Outage probability, DMT slope estimation, and diversity bounds.

Rates are expressed in multiplexing-gain units: a policy with rate r
targets r * log2(1 + rho) bits per channel use.  A frame spans
``r_prime_factor`` channel uses (initialisation slot and guard periods
included), so the trial is in outage when the block mutual information
falls below r_prime_factor * r * log2(1 + rho).

Monte Carlo draws come from the counter-based fade streams in
:mod:`asaf.core`; a point is reproducible from (config, seed, trials)
alone, independent of chunking, backend, or worker count.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .builders import PROTOCOLS, build_for_protocol
from .core import DelayProfile, NetworkConfig, sample_fade_block
from .errors import InsufficientData, InvalidRegime, NonFinite, ValidationError
from .kernels import compile_matrix, outage_count

__all__ = [
    "RatePolicy",
    "OutagePoint",
    "OutageCurve",
    "SlopeFit",
    "SanityReport",
    "mutual_info",
    "outage_prob",
    "run_curve",
    "dmt_slope",
    "bound_eval",
    "transmit_bound",
    "bound_sanity",
]

#: trials evaluated per kernel call; results are chunk-size invariant
CHUNK = 1 << 14


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        raw = os.environ.get("ASAF_WORKERS", "1").strip()
        try:
            workers = int(raw)
        except ValueError:
            raise ValidationError(f"ASAF_WORKERS must be an integer, got {raw!r}")
    if workers < 1:
        raise ValidationError("worker count must be >= 1")
    return workers


def _frame_uses(protocol: str, cfg: NetworkConfig, dp: DelayProfile | None) -> int:
    """Channel uses occupied by one frame, init slot included."""
    M, T = cfg.n_slots, cfg.slot_len
    theta = dp.theta if dp is not None else 0
    if protocol == "sync":
        return (M + 1) * T
    if protocol in ("prop-naive", "offset", "offset-dl"):
        return (M + 1) * T + theta
    if protocol == "guard":
        return M * (T + cfg.guard_len) + T
    if protocol == "guard-dl":
        return (M + 1) * (T + cfg.guard_len)
    if protocol == "direct":
        return 1
    raise ValidationError(f"unknown protocol {protocol!r}")


@dataclass(frozen=True)
class RatePolicy:
    """Target multiplexing rate plus the frame-length factor for thresholds."""

    protocol: str
    r: float
    r_prime_factor: int

    def __post_init__(self):
        if self.r < 0:
            raise ValidationError("rate must be non-negative")
        if self.r_prime_factor < 1:
            raise ValidationError("r_prime_factor must be >= 1")

    @classmethod
    def for_protocol(cls, protocol: str, cfg: NetworkConfig,
                     dp: DelayProfile | None, r: float) -> "RatePolicy":
        return cls(protocol=protocol, r=r,
                   r_prime_factor=_frame_uses(protocol, cfg, dp))

    def threshold_bits(self, rho: float) -> float:
        return self.r_prime_factor * self.r * math.log2(1.0 + rho)


@dataclass(frozen=True)
class OutagePoint:
    rho_db: float
    trials: int
    outages: int

    @property
    def p_out(self) -> float:
        return self.outages / self.trials

    @property
    def std_err(self) -> float:
        p = self.p_out
        return math.sqrt(p * (1.0 - p) / self.trials)


@dataclass(frozen=True)
class OutageCurve:
    policy: RatePolicy
    points: tuple[OutagePoint, ...]
    cfg: NetworkConfig | None = None
    dp: DelayProfile | None = None
    seed: int | None = None

    def __post_init__(self):
        db = [p.rho_db for p in self.points]
        if any(b <= a for a, b in zip(db, db[1:])):
            raise ValidationError("curve points must have strictly increasing rho_db")

    def __iter__(self):
        return iter(self.points)


def mutual_info(H: np.ndarray, rho: float) -> float:
    """log2 det(I + rho H H*) in bits, computed in the log domain."""
    if rho <= 0:
        raise ValidationError("rho must be positive")
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2:
        raise ValidationError("channel matrix must be 2-dimensional")
    if not np.all(np.isfinite(H)):
        raise NonFinite("channel matrix has non-finite entries")
    with np.errstate(over="ignore", invalid="ignore"):
        G = np.eye(H.shape[0], dtype=np.complex128) + rho * (H @ H.conj().T)
    if not np.all(np.isfinite(G)):
        raise NonFinite("Gram matrix overflowed")
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:   # pragma: no cover - G is PD by form
        raise NonFinite(f"Gram matrix not positive definite: {exc}")
    return float(2.0 * np.sum(np.log2(np.diagonal(L).real)))


def _count_outages(cm, cfg: NetworkConfig, rho: float, thr: float,
                   trials: int, seed: int, workers: int) -> int:
    total = 0
    done = 0
    while done < trials:
        n = min(CHUNK, trials - done)
        fades = sample_fade_block(cfg, seed, done, n)
        total += outage_count(cm, fades, rho, thr, workers=workers)
        done += n
    return total


def outage_prob(cfg: NetworkConfig, dp: DelayProfile | None, policy: RatePolicy,
                rho_db: float, trials: int, seed: int,
                workers: int | None = None, matrix=None) -> OutagePoint:
    """Monte Carlo outage probability at a single SNR point.

    ``matrix`` substitutes a prebuilt symbolic matrix (e.g. a diagonal
    extraction) for the policy's protocol build.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    m = matrix if matrix is not None else build_for_protocol(policy.protocol, cfg, dp)
    cm = compile_matrix(m, cfg.n_relays)
    rho = 10.0 ** (rho_db / 10.0)
    outages = _count_outages(cm, cfg, rho, policy.threshold_bits(rho),
                             trials, seed, resolve_workers(workers))
    return OutagePoint(rho_db=rho_db, trials=trials, outages=outages)


def run_curve(cfg: NetworkConfig, dp: DelayProfile | None, policy: RatePolicy,
              rho_db: "list[float]", trials, seed: int,
              workers: int | None = None, point_hook=None,
              matrix=None) -> OutageCurve:
    """Sweep SNR points; ``trials`` may be one int or one per point.

    Each point gets its own seed offset so adding points never perturbs
    earlier ones.  ``point_hook`` (if given) sees each finished point.
    """
    if isinstance(trials, int):
        trials = [trials] * len(rho_db)
    if len(trials) != len(rho_db):
        raise ValidationError("need one trial count per rho point")
    m = matrix if matrix is not None else build_for_protocol(policy.protocol, cfg, dp)
    cm = compile_matrix(m, cfg.n_relays)
    nworkers = resolve_workers(workers)
    points = []
    for i, (db, n) in enumerate(zip(rho_db, trials)):
        rho = 10.0 ** (db / 10.0)
        outages = _count_outages(cm, cfg, rho, policy.threshold_bits(rho),
                                 n, seed + i, nworkers)
        pt = OutagePoint(rho_db=db, trials=n, outages=outages)
        points.append(pt)
        if point_hook is not None:
            point_hook(pt)
    return OutageCurve(policy=policy, points=tuple(points), cfg=cfg, dp=dp, seed=seed)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float                    # RMS of log10 fit residuals
    n_points: int
    window_db: tuple[float, float]


def dmt_slope(curve: OutageCurve, window_db: tuple[float, float],
              min_outages: int = 10) -> SlopeFit:
    """Least-squares diversity slope of log10 p_out against log10 rho.

    Points inside the window need at least ``min_outages`` events to
    enter the fit; a zero-outage point in the window, or fewer than
    three usable points, is an error rather than a guess.
    """
    lo, hi = window_db
    inside = [p for p in curve.points if lo <= p.rho_db <= hi]
    if any(p.outages == 0 for p in inside):
        raise InsufficientData("zero-outage point inside the fit window")
    pts = [p for p in inside if p.outages >= min_outages]
    if len(pts) < 3:
        raise InsufficientData(
            f"need >= 3 points with >= {min_outages} outages in "
            f"[{lo}, {hi}] dB, have {len(pts)}")
    x = np.array([p.rho_db / 10.0 for p in pts])       # log10 rho
    y = np.array([math.log10(p.p_out) for p in pts])
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return SlopeFit(slope=-float(coef[0]), intercept=float(coef[1]),
                    residual=float(np.sqrt(np.mean(resid ** 2))),
                    n_points=len(pts), window_db=(lo, hi))


# ======================================================================
# closed-form DMT bounds
# ======================================================================

def _pos(v: float) -> float:
    return v if v > 0.0 else 0.0


def _theta_of(cfg: NetworkConfig, dp: DelayProfile | None) -> int:
    return dp.theta if dp is not None else cfg.guard_len


def bound_eval(protocol: str, cfg: NetworkConfig, dp: DelayProfile | None,
               r: float, x: int | None = None) -> float:
    """Diversity lower bound d(r) for one protocol at multiplexing rate r.

    theta comes from the delay profile (or cfg.guard_len when dp is
    None).  ``x`` switches the guard bound to its general-guard-length
    form; the clean-symbol count is capped at T, which is what makes
    x = theta the optimum.  Additive terms clamp at zero individually.
    """
    if not 0 <= r:
        raise ValidationError("rate must be non-negative")
    N, M, T = cfg.n_relays, cfg.n_slots, cfg.slot_len
    theta = _theta_of(cfg, dp)
    if theta >= T and protocol != "sync":
        raise InvalidRegime(f"theta={theta} must be < slot_len={T}")
    if protocol == "sync":
        return N * _pos(1.0 - (M + 1) / M * r)
    if protocol == "prop-naive":
        if T <= 2 * theta:
            raise InvalidRegime(
                f"naive bound needs T > 2*theta, have T={T}, theta={theta}")
        return N * _pos(1.0 - ((M + 1) * T + theta) / (M * (T - 2 * theta)) * r)
    if protocol == "guard":
        if x is None:
            return N * _pos(1.0 - (M * (T + theta) + T) / (M * T) * r)
        if x < 0:
            raise ValidationError("guard length must be >= 0")
        clean = min(T - 2 * theta + 2 * x, T)
        if clean <= 0:
            raise InvalidRegime(
                f"guard x={x} leaves no clean symbols (T={T}, theta={theta})")
        return N * _pos(1.0 - (T + x) / clean * r)
    if protocol == "guard-dl":
        return (_pos(1.0 - (T + theta) / T * r)
                + N * _pos(1.0 - ((M + 1) * (T + theta)) / (M * (T - theta)) * r))
    if protocol == "offset":
        return N * _pos(1.0 - ((M + 1) * T + theta) / (M * (T - theta)) * r)
    if protocol == "offset-dl":
        return (_pos(1.0 - ((M + 1) * T + theta) / ((M + 1) * T) * r)
                + N * _pos(1.0 - ((M + 1) * T + theta) / (M * (T - theta)) * r))
    raise ValidationError(f"unknown protocol {protocol!r}")


def transmit_bound(cfg: NetworkConfig, r: float) -> float:
    """Transmit-diversity ceiling: every scheme sits at or below this."""
    n_branch = cfg.n_relays + (1 if cfg.direct_link else 0)
    return n_branch * _pos(1.0 - r)


#: protocols whose bound counts the direct-link branch
_DL_BOUNDS = frozenset({"guard-dl", "offset-dl"})


@dataclass(frozen=True)
class SanityReport:
    n_checks: int
    violations: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


def bound_sanity(cfg: NetworkConfig, dp: DelayProfile | None = None,
                 r_grid=None) -> SanityReport:
    """Cross-checks on the bound family; returns violations, raises nothing.

    Checks, per rate on the grid: guard bound maximised at x = theta
    over x in [0, 2*theta], every bound below the matching transmit
    ceiling, and every bound non-increasing in r.
    """
    if r_grid is None:
        r_grid = [i / 20.0 for i in range(0, 20)]
    theta = _theta_of(cfg, dp)
    dl_cfg = NetworkConfig(
        n_relays=cfg.n_relays, n_slots=cfg.n_slots, slot_len=cfg.slot_len,
        guard_len=cfg.guard_len, direct_link=True, relay_isolated=True,
        model=cfg.model)
    checks = 0
    bad = []
    prev: dict[str, float] = {}
    for r in r_grid:
        d_star = bound_eval("guard", cfg, dp, r, x=theta)
        for x in range(0, 2 * theta + 1):
            if min(cfg.slot_len - 2 * theta + 2 * x, cfg.slot_len) <= 0:
                continue
            checks += 1
            if bound_eval("guard", cfg, dp, r, x=x) > d_star + 1e-12:
                bad.append(f"guard x={x} beats x=theta at r={r:g}")
        for proto in PROTOCOLS:
            if proto == "prop-naive" and cfg.slot_len <= 2 * theta:
                continue
            use_cfg = dl_cfg if proto in _DL_BOUNDS else cfg
            d = bound_eval(proto, use_cfg, dp, r)
            checks += 1
            if d > transmit_bound(use_cfg, r) + 1e-12:
                bad.append(f"{proto} exceeds transmit bound at r={r:g}")
            if proto in prev:
                checks += 1
                if d > prev[proto] + 1e-12:
                    bad.append(f"{proto} bound increased approaching r={r:g}")
            prev[proto] = d
    return SanityReport(n_checks=checks, violations=tuple(bad))
