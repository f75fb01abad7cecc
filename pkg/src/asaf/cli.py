"""Command line front end.

Subcommands: ``matrix`` (symbolic or numeric channel-matrix dumps),
``outage`` (Monte Carlo SNR sweeps to CSV plus a run manifest),
``bound`` (closed-form diversity bounds to CSV), ``plot`` (CSV to SVG
line charts) and ``dmt`` (slope fits on outage CSVs).

Everything emitted is a pure function of flags, spec file and seed: no
wall-clock content goes into data outputs, so reruns are byte-identical
and diffable.  Exit codes: 0 success, 2 bad configuration, 3 runtime or
data error, with a machine-parsable ``error: <code>: <detail>`` line on
stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

from . import __version__
from .builders import PROTOCOL_MODEL, PROTOCOLS, build_for_protocol
from .core import (
    AsyncModel,
    DelayProfile,
    NetworkConfig,
    sample_fades,
    validate_config,
)
from .errors import AsafError, InsufficientData, SchemaMismatch, ValidationError
from .infotheory import (
    OutageCurve,
    OutagePoint,
    RatePolicy,
    bound_eval,
    dmt_slope,
    run_curve,
    transmit_bound,
)
from .symbolic import evaluate, numeric_to_text, to_text

OUTAGE_HEADER = "protocol,N,M,T,theta,x,r,r_prime,rho_db,trials,outages,p_out,std_err"
BOUND_HEADER = "r,d_bound,d_transmit"

_DL_PROTOCOLS = ("guard-dl", "offset-dl")


# ======================================================================
# flag parsing helpers
# ======================================================================

def _parse_ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}")


def _parse_floats(text: str) -> list:
    """Comma list ``v1,v2,...`` or inclusive range ``a:b:step``."""
    try:
        if ":" in text:
            a, b, step = (float(v) for v in text.split(":"))
            if step <= 0 or b < a:
                raise ValidationError(f"bad sweep range {text!r}")
            n = int(round((b - a) / step))
            vals = [a + i * step for i in range(n + 1)]
            return [v for v in vals if v <= b + 1e-9]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"expected floats or a:b:step, got {text!r}")


def _theta_profile(theta: int, n: int) -> tuple:
    """Convenience single-relay-late profile realizing a given theta."""
    return (theta,) + (0,) * (n - 1) if n else ()


def _network_from_args(args):
    """(protocol, cfg, dp) from command line flags."""
    protocol = args.protocol
    if protocol is None:
        raise ValidationError("--protocol is required")

    lists = {}
    for name in ("nu", "pi", "tau"):
        raw = getattr(args, name, None)
        lists[name] = _parse_ints(raw) if raw else None
    theta = getattr(args, "theta", None)
    if theta is not None and any(v is not None for v in lists.values()):
        raise ValidationError("--theta conflicts with explicit --nu/--pi/--tau")

    if protocol == "direct":
        n = args.relays if args.relays is not None else 0
        cfg = NetworkConfig(n_relays=n, n_slots=args.slots or 1,
                            slot_len=args.slot_len or 1,
                            direct_link=True, relay_isolated=True)
        dp = DelayProfile.propagation((0,) * n, (0,) * n, tau0=args.tau0 or 0)
        validate_config(cfg, dp)
        return protocol, cfg, dp

    if protocol not in PROTOCOLS:
        raise ValidationError(f"unknown protocol {protocol!r}")
    model = PROTOCOL_MODEL[protocol]

    n = args.relays
    if n is None:
        for v in lists.values():
            if v is not None:
                n = len(v)
                break
        else:
            raise ValidationError("--relays is required (cannot infer N)")
    m_slots = args.slots if args.slots is not None else n
    if args.slot_len is None:
        raise ValidationError("--slot-len is required")

    direct = args.direct_link or protocol in _DL_PROTOCOLS
    isolated = args.isolated or protocol in _DL_PROTOCOLS

    if model is AsyncModel.SLOT_OFFSET:
        tau = lists["tau"]
        if tau is None:
            tau = _theta_profile(theta or 0, n)
        dp = DelayProfile.offset(tau)
    else:
        nu = lists["nu"] or (0,) * n
        pi = lists["pi"]
        if pi is None:
            pi = _theta_profile(theta or 0, n)
        tau0 = args.tau0
        if tau0 is None and direct:
            tau0 = 0
        dp = DelayProfile.propagation(nu, pi, tau0=tau0)

    guard = args.guard
    if guard is None:
        guard = dp.theta if protocol in ("guard", "guard-dl") else 0
    cfg = NetworkConfig(n_relays=n, n_slots=m_slots, slot_len=args.slot_len,
                        guard_len=guard, direct_link=direct,
                        relay_isolated=isolated, model=model)
    validate_config(cfg, dp)
    return protocol, cfg, dp


# ======================================================================
# experiment specs and manifests
# ======================================================================

@dataclass(frozen=True)
class ExperimentSpec:
    cfg: NetworkConfig
    dp: DelayProfile
    protocol: str
    r_values: tuple
    rho_db_values: tuple
    trials_per_point: object           # int, or one int per rho point
    seed: int
    output_dir: str

    def __post_init__(self):
        if not self.r_values or not self.rho_db_values:
            raise ValidationError("sweep lists must be non-empty")
        trials = self.trials_per_point
        flat = trials if isinstance(trials, (list, tuple)) else [trials]
        if any(int(t) < 1 for t in flat):
            raise ValidationError("trials_per_point must be >= 1")

    def to_json_dict(self) -> dict:
        cfg, dp = self.cfg, self.dp
        return {
            "cfg": {
                "n_relays": cfg.n_relays, "n_slots": cfg.n_slots,
                "slot_len": cfg.slot_len, "guard_len": cfg.guard_len,
                "direct_link": cfg.direct_link,
                "relay_isolated": cfg.relay_isolated,
                "model": cfg.model.value,
            },
            "dp": {
                "kind": dp.kind, "nu": list(dp.nu), "pi": list(dp.pi),
                "tau0": dp.tau0, "tau": list(dp.tau),
            },
            "protocol": self.protocol,
            "r_values": list(self.r_values),
            "rho_db_values": list(self.rho_db_values),
            "trials_per_point": (list(self.trials_per_point)
                                 if isinstance(self.trials_per_point, (list, tuple))
                                 else self.trials_per_point),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


def load_spec(path: str) -> ExperimentSpec:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read spec file: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec file is not valid JSON: {exc}")
    try:
        c = raw["cfg"]
        cfg = NetworkConfig(
            n_relays=int(c["n_relays"]), n_slots=int(c["n_slots"]),
            slot_len=int(c["slot_len"]), guard_len=int(c.get("guard_len", 0)),
            direct_link=bool(c.get("direct_link", False)),
            relay_isolated=bool(c.get("relay_isolated", False)),
            model=AsyncModel(c.get("model", "synchronous")))
        d = raw.get("dp", {})
        if d.get("kind", "prop") == "offset":
            dp = DelayProfile.offset(d.get("tau", ()))
        else:
            dp = DelayProfile.propagation(
                d.get("nu", (0,) * cfg.n_relays),
                d.get("pi", (0,) * cfg.n_relays),
                tau0=d.get("tau0"))
        trials = raw["trials_per_point"]
        if isinstance(trials, list):
            trials = [int(t) for t in trials]
        else:
            trials = int(trials)
        spec = ExperimentSpec(
            cfg=cfg, dp=dp, protocol=raw["protocol"],
            r_values=tuple(float(r) for r in raw["r_values"]),
            rho_db_values=tuple(float(v) for v in raw["rho_db_values"]),
            trials_per_point=trials, seed=int(raw["seed"]),
            output_dir=raw.get("output_dir", "."))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad spec file field: {exc!r}")
    validate_config(spec.cfg, spec.dp)
    return spec


def _spec_from_flags(args) -> ExperimentSpec:
    protocol, cfg, dp = _network_from_args(args)
    if args.r is None or args.rho_db is None:
        raise ValidationError("--r and --rho-db are required without --spec")
    return ExperimentSpec(
        cfg=cfg, dp=dp, protocol=protocol,
        r_values=tuple(_parse_floats(args.r)),
        rho_db_values=tuple(_parse_floats(args.rho_db)),
        trials_per_point=args.trials, seed=args.seed,
        output_dir=args.out or ".")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# ======================================================================
# subcommands
# ======================================================================

def cmd_matrix(args) -> int:
    protocol, cfg, dp = _network_from_args(args)
    m = build_for_protocol(protocol, cfg, dp)
    if args.numeric:
        text = numeric_to_text(evaluate(m, sample_fades(cfg, args.seed, args.trial)))
    else:
        text = to_text(m)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _outage_row(spec: ExperimentSpec, policy: RatePolicy, pt: OutagePoint) -> str:
    cfg, dp = spec.cfg, spec.dp
    r_prime = policy.r_prime_factor * policy.r
    return (f"{spec.protocol},{cfg.n_relays},{cfg.n_slots},{cfg.slot_len},"
            f"{dp.theta:g},{cfg.guard_len:g},{policy.r:g},{r_prime:.6g},"
            f"{pt.rho_db:g},{pt.trials},{pt.outages},"
            f"{pt.p_out:.6g},{pt.std_err:.6g}")


def cmd_outage(args) -> int:
    spec = load_spec(args.spec) if args.spec else _spec_from_flags(args)
    if args.out:
        spec = ExperimentSpec(**{**spec.__dict__, "output_dir": args.out})
    os.makedirs(spec.output_dir, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    outputs = []
    for r in spec.r_values:
        policy = RatePolicy.for_protocol(spec.protocol, spec.cfg, spec.dp, r)
        name = f"outage_r{r:g}.csv"
        path = os.path.join(spec.output_dir, name)
        with open(path, "w") as fh:
            fh.write(OUTAGE_HEADER + "\n")
            fh.flush()

            def flush_point(pt, _policy=policy, _fh=fh):
                _fh.write(_outage_row(spec, _policy, pt) + "\n")
                _fh.flush()

            run_curve(spec.cfg, spec.dp, policy, list(spec.rho_db_values),
                      spec.trials_per_point if isinstance(spec.trials_per_point, int)
                      else list(spec.trials_per_point),
                      spec.seed, point_hook=flush_point)
        outputs.append({"file": name, "sha256": _sha256(path)})
    manifest = {
        "tool": "asaf",
        "version": __version__,
        "spec": spec.to_json_dict(),
        "started_utc": started,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
    }
    mpath = os.path.join(spec.output_dir, "run_manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(outputs)} curve(s) and run_manifest.json to {spec.output_dir}")
    return 0


def cmd_bound(args) -> int:
    protocol, cfg, dp = _network_from_args(args)
    if args.r is None:
        raise ValidationError("--r grid is required")
    lines = [BOUND_HEADER]
    for r in _parse_floats(args.r):
        d = bound_eval(protocol, cfg, dp, r)
        lines.append(f"{r:.9g},{d:.9g},{transmit_bound(cfg, r):.9g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    series = []
    kind = None
    for path in args.csv:
        file_kind, file_series = _load_csv_series(path, prefix_files=len(args.csv) > 1)
        if kind is None:
            kind = file_kind
        elif kind != file_kind:
            raise SchemaMismatch("cannot mix outage and bound CSVs in one plot")
        series.extend(file_series)
    if kind == "outage":
        svg = render_svg(series, x_label="rho (dB)", y_label="log10 p_out")
    else:
        svg = render_svg(series, x_label="r", y_label="d(r)")
    with open(args.out, "w") as fh:
        fh.write(svg)
    return 0


def cmd_dmt(args) -> int:
    try:
        lo, hi = (float(v) for v in args.window.split(":"))
    except ValueError:
        raise ValidationError(f"--window wants lo:hi in dB, got {args.window!r}")
    if hi <= lo:
        raise ValidationError("--window needs lo < hi")
    curves = _outage_csv_to_curves(args.csv)
    if not curves:
        raise SchemaMismatch(f"no data rows in {args.csv}")
    for r, curve in curves:
        fit = dmt_slope(curve, (lo, hi))
        print(f"r={r:g} slope={fit.slope:.2f} intercept={fit.intercept:.3f} "
              f"residual={fit.residual:.3f} points={fit.n_points}")
    return 0


# ======================================================================
# CSV ingestion (plot / dmt)
# ======================================================================

def _read_rows(path: str):
    try:
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    except OSError as exc:
        raise SchemaMismatch(f"cannot read {path}: {exc}")
    if not lines:
        raise SchemaMismatch(f"{path} is empty")
    return lines[0], [ln.split(",") for ln in lines[1:]]


def _outage_csv_to_curves(path: str):
    header, rows = _read_rows(path)
    if header != OUTAGE_HEADER:
        raise SchemaMismatch(f"{path} does not carry the outage schema")
    cols = OUTAGE_HEADER.split(",")
    by_r: dict = {}
    for row in rows:
        if len(row) != len(cols):
            raise SchemaMismatch(f"{path}: row has {len(row)} fields, need {len(cols)}")
        rec = dict(zip(cols, row))
        pt = OutagePoint(rho_db=float(rec["rho_db"]), trials=int(rec["trials"]),
                         outages=int(rec["outages"]))
        by_r.setdefault((float(rec["r"]), rec["protocol"], rec["r_prime"]), []).append(pt)
    curves = []
    for (r, protocol, r_prime), pts in sorted(by_r.items()):
        factor = max(1, round(float(r_prime) / r)) if r > 0 else 1
        policy = RatePolicy(protocol=protocol, r=r, r_prime_factor=factor)
        pts = sorted(pts, key=lambda p: p.rho_db)
        curves.append((r, OutageCurve(policy=policy, points=tuple(pts))))
    return curves


def _load_csv_series(path: str, prefix_files: bool):
    """(kind, [(label, [(x, y), ...]), ...]) for one CSV file."""
    stem = os.path.splitext(os.path.basename(path))[0]
    header, rows = _read_rows(path)
    if header == OUTAGE_HEADER:
        series = []
        for r, curve in _outage_csv_to_curves(path):
            pts = [(p.rho_db, math.log10(p.p_out))
                   for p in curve.points if p.outages > 0]
            label = f"{stem}: r={r:g}" if prefix_files else f"r={r:g}"
            series.append((label, pts))
        return "outage", series
    if header == BOUND_HEADER:
        d_bound, d_tx = [], []
        for row in rows:
            if len(row) != 3:
                raise SchemaMismatch(f"{path}: bound rows need 3 fields")
            r, db, dt = (float(v) for v in row)
            d_bound.append((r, db))
            d_tx.append((r, dt))
        pre = f"{stem}: " if prefix_files else ""
        return "bound", [(pre + "d_bound", d_bound), (pre + "d_transmit", d_tx)]
    raise SchemaMismatch(f"{path} carries neither the outage nor the bound schema")


# ======================================================================
# SVG rendering
# ======================================================================
#
# Hand-rolled SVG 1.1: data series are the only <polyline> elements
# (axes and ticks are <line>s) so chart cardinality is testable, and
# nothing time- or locale-dependent is emitted.

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 72, 24, 24, 56


def _bounds(vals):
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def render_svg(series, x_label: str, y_label: str) -> str:
    """Deterministic line chart; one <polyline> per series."""
    drawable = [(lab, pts) for lab, pts in series if pts]
    if not drawable:
        raise SchemaMismatch("nothing to plot: no finite data points")
    xlo, xhi = _bounds([x for _, pts in drawable for x, _ in pts])
    ylo, yhi = _bounds([y for _, pts in drawable for _, y in pts])
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x):
        return _ML + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return _H - _MB - (y - ylo) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        f'stroke="black" stroke-width="1"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
        f'stroke="black" stroke-width="1"/>',
    ]
    for i in range(6):
        xv = xlo + i * (xhi - xlo) / 5
        yv = ylo + i * (yhi - ylo) / 5
        xp, yp = px(xv), py(yv)
        out.append(f'<line x1="{xp:.2f}" y1="{_H - _MB}" x2="{xp:.2f}" '
                   f'y2="{_H - _MB + 5}" stroke="black" stroke-width="1"/>')
        out.append(f'<text x="{xp:.2f}" y="{_H - _MB + 18}" font-size="11" '
                   f'text-anchor="middle" font-family="sans-serif">{xv:.3g}</text>')
        out.append(f'<line x1="{_ML - 5}" y1="{yp:.2f}" x2="{_ML}" y2="{yp:.2f}" '
                   f'stroke="black" stroke-width="1"/>')
        out.append(f'<text x="{_ML - 8}" y="{yp + 4:.2f}" font-size="11" '
                   f'text-anchor="end" font-family="sans-serif">{yv:.3g}</text>')
    out.append(f'<text x="{(_ML + _W - _MR) / 2:.2f}" y="{_H - 16}" font-size="13" '
               f'text-anchor="middle" font-family="sans-serif">{x_label}</text>')
    out.append(f'<text x="18" y="{(_MT + _H - _MB) / 2:.2f}" font-size="13" '
               f'text-anchor="middle" font-family="sans-serif" '
               f'transform="rotate(-90 18 {(_MT + _H - _MB) / 2:.2f})">{y_label}</text>')
    for i, (label, pts) in enumerate(drawable):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{coords}"/>')
        ly = _MT + 14 + 16 * i
        out.append(f'<rect x="{_W - _MR - 150}" y="{ly - 9}" width="18" height="4" '
                   f'fill="{color}"/>')
        out.append(f'<text x="{_W - _MR - 126}" y="{ly}" font-size="11" '
                   f'font-family="sans-serif">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ======================================================================
# argument parser
# ======================================================================

def _add_network_flags(p: argparse.ArgumentParser):
    p.add_argument("--relays", "-N", type=int, help="number of relays N")
    p.add_argument("--slots", "-M", type=int, help="slots per frame M (default N)")
    p.add_argument("--slot-len", "-T", type=int, dest="slot_len",
                   help="channel uses per slot T")
    p.add_argument("--guard", "-x", type=int,
                   help="guard length (default theta for guard protocols)")
    p.add_argument("--direct-link", action="store_true",
                   help="destination also hears the source")
    p.add_argument("--isolated", action="store_true",
                   help="relays cannot hear each other")
    p.add_argument("--protocol", choices=PROTOCOLS + ("direct",),
                   help="protocol variant")
    p.add_argument("--nu", help="source->relay delays, comma list")
    p.add_argument("--pi", help="relay->destination delays, comma list")
    p.add_argument("--tau", help="slot clock offsets, comma list")
    p.add_argument("--tau0", type=int, help="direct-link delay")
    p.add_argument("--theta", type=int,
                   help="shorthand: one relay late by theta, the rest aligned")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="asaf",
        description="slotted amplify-and-forward relay protocols: "
                    "channel matrices, outage sweeps, DMT bounds")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("matrix", help="dump a protocol channel matrix")
    _add_network_flags(p)
    p.add_argument("--numeric", action="store_true",
                   help="substitute a fading draw instead of symbols")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("outage", help="Monte Carlo outage sweep to CSV")
    _add_network_flags(p)
    p.add_argument("--r", help="multiplexing gains, comma list or a:b:step")
    p.add_argument("--rho-db", dest="rho_db", help="SNR sweep, comma list or a:b:step")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--spec", help="JSON experiment spec instead of flags")
    p.set_defaults(func=cmd_outage)

    p = sub.add_parser("bound", help="closed-form diversity bound sweep")
    _add_network_flags(p)
    p.add_argument("--r", help="rate grid, comma list or a:b:step")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("plot", help="render outage or bound CSVs as SVG")
    p.add_argument("csv", nargs="+", help="input CSV files")
    p.add_argument("--out", required=True, help="output SVG path")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("dmt", help="fit diversity slopes on an outage CSV")
    p.add_argument("csv", help="outage CSV file")
    p.add_argument("--window", required=True, help="fit window lo:hi in dB")
    p.set_defaults(func=cmd_dmt)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AsafError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return exc.exit_status


if __name__ == "__main__":
    sys.exit(main())
