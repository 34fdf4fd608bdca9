"""Command-line front end: ``degdispatch {rainflow,dispatch,sweep,verify}``.

Every subcommand takes an optional JSON config file; flags override it.
The config is a flat object of problem parameters (see
``dispatch.problem.DEFAULTS``) plus the optional keys ``demand``
(path to a ``t,demand_mw`` CSV), ``synthetic`` (``{"T", "base_mw",
"amplitude_mw", "peak_hour"}``), ``strategies`` (list) and ``sweep``
(``"B:25:300:12"`` or ``{"variable", "start", "stop", "steps"}``).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .dispatch import (
    ConfigurationError,
    DispatchSolution,
    InfeasibleProblemError,
    SolverError,
    assemble_problem,
    kkt_residual,
    solve_gcd,
    solve_gd,
    solve_sdad,
)
from .dispatch.problem import CONFIG_KEYS
from .market import extract_prices, uniqueness_certificate, verify_incentive_compatibility
from .rainflow import InvalidProfileError, half_cycle_table, load_soc_csv

STRATEGIES = ("SDAD", "GCD", "GD")
SYNTHETIC_DEFAULTS = {"T": 24, "base_mw": 1500.0, "amplitude_mw": 500.0, "peak_hour": 18.0}
BALANCE_TOL = 1e-9


class IngestionError(ValueError):
    """Bad demand file or config; the message names the offending row or key."""


# ---------------------------------------------------------------- demand


def load_demand_csv(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"{path}: no such file")
    values = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "demand_mw"]:
            raise IngestionError(f"{path}: expected header 't,demand_mw', got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise IngestionError(f"{path}: row {row_no}: expected 2 fields, got {len(row)}")
            try:
                t = int(row[0])
                d = float(row[1])
            except ValueError as exc:
                raise IngestionError(f"{path}: row {row_no}: malformed value ({exc})") from exc
            if t != len(values):
                what = "duplicate" if t < len(values) else "non-contiguous"
                raise IngestionError(f"{path}: row {row_no}: {what} t={t}, expected t={len(values)}")
            if not math.isfinite(d) or d <= 0:
                raise IngestionError(f"{path}: row {row_no}: demand must be positive, got {d}")
            values.append(d)
    if len(values) < 2:
        raise IngestionError(f"{path}: need at least 2 demand rows, got {len(values)}")
    return np.array(values)


def synthetic_demand(T: int, base_mw: float, amplitude_mw: float, peak_hour: float) -> np.ndarray:
    """Daily cosine load shape peaking at ``peak_hour``."""
    if int(T) != T or T < 2:
        raise ValueError(f"T must be an integer >= 2, got {T}")
    if amplitude_mw < 0:
        raise ValueError(f"amplitude must be nonnegative, got {amplitude_mw}")
    if amplitude_mw >= base_mw:
        raise ValueError(f"amplitude {amplitude_mw} >= base {base_mw} allows nonpositive demand")
    t = np.arange(int(T))
    return base_mw + amplitude_mw * np.cos(2.0 * np.pi * (t - peak_hour) / T)


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.variable not in ("B", "E"):
            raise ConfigurationError(f"sweep variable must be B or E, got {self.variable!r}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ConfigurationError(f"sweep needs at least 2 steps, got {self.steps}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ConfigurationError("sweep bounds must be finite")

    @classmethod
    def parse(cls, spec) -> "SweepSpec":
        if isinstance(spec, SweepSpec):
            return spec
        if isinstance(spec, dict):
            try:
                return cls(str(spec["variable"]), float(spec["start"]), float(spec["stop"]), int(spec["steps"]))
            except KeyError as exc:
                raise ConfigurationError(f"sweep spec is missing {exc}") from exc
        parts = str(spec).split(":")
        if len(parts) != 4:
            raise ConfigurationError(f"sweep spec must look like B:25:300:12, got {spec!r}")
        try:
            return cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise ConfigurationError(f"bad sweep spec {spec!r}: {exc}") from exc

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, int(self.steps))


@dataclass(frozen=True)
class RunConfig:
    params: dict = field(default_factory=dict)
    strategies: tuple = STRATEGIES
    sweep: SweepSpec | None = None
    demand_path: str | None = None
    synthetic: dict = field(default_factory=lambda: dict(SYNTHETIC_DEFAULTS))
    out_dir: str = "."
    plot: bool = False

    def __post_init__(self):
        unknown = set(self.params) - CONFIG_KEYS
        if unknown:
            raise ConfigurationError(f"unknown parameters: {sorted(unknown)}")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad or not self.strategies:
            raise ConfigurationError(f"strategies must be a nonempty subset of {STRATEGIES}, got {list(self.strategies)}")
        if self.demand_path is not None and not str(self.demand_path):
            raise ConfigurationError("demand path is empty")
        if not str(self.out_dir):
            raise ConfigurationError("output directory is empty")
        extra = set(self.synthetic) - set(SYNTHETIC_DEFAULTS)
        if extra:
            raise ConfigurationError(f"unknown synthetic-demand keys: {sorted(extra)}")

    def demand(self) -> np.ndarray:
        if self.demand_path is not None:
            return load_demand_csv(self.demand_path)
        s = {**SYNTHETIC_DEFAULTS, **self.synthetic}
        return synthetic_demand(int(s["T"]), float(s["base_mw"]), float(s["amplitude_mw"]), float(s["peak_hour"]))

    def problem(self):
        return assemble_problem(self.params, self.demand())


def _parse_strategies(text) -> tuple:
    items = text.split(",") if isinstance(text, str) else list(text)
    return tuple(dict.fromkeys(s.strip().upper() for s in items if s.strip()))


def build_config(args) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise IngestionError(f"{path}: no such file") from exc
        except json.JSONDecodeError as exc:
            raise IngestionError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise IngestionError(f"{path}: top level must be an object")
    raw = dict(raw)
    demand_path = raw.pop("demand", None)
    if demand_path is not None and getattr(args, "config", None):
        # relative demand paths are read next to the config file
        demand_path = str(Path(args.config).parent / demand_path)
    synthetic = {**SYNTHETIC_DEFAULTS, **raw.pop("synthetic", {})}
    strategies = _parse_strategies(raw.pop("strategies", STRATEGIES))
    sweep = raw.pop("sweep", None)

    if getattr(args, "demand", None):
        demand_path = args.demand
    if getattr(args, "strategy", None):
        strategies = _parse_strategies(args.strategy)
    if getattr(args, "sweep", None):
        sweep = args.sweep
    return RunConfig(
        params=raw, strategies=strategies, sweep=None if sweep is None else SweepSpec.parse(sweep),
        demand_path=demand_path, synthetic=synthetic,
        out_dir=getattr(args, "out", None) or ".", plot=bool(getattr(args, "plot", False)),
    )


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    return repr(float(v))


def _solve(strategy: str, prob) -> DispatchSolution:
    if strategy == "SDAD":
        return solve_sdad(prob)
    if strategy == "GCD":
        return solve_gcd(prob)
    return solve_gd(prob)


def write_solution_csv(sol: DispatchSolution, prob, path) -> None:
    gap = np.max(np.abs(prob.D + sol.u - sol.g))
    if gap > BALANCE_TOL * max(1.0, float(np.max(np.abs(prob.D)))):
        raise SolverError(f"{sol.strategy}: power balance violated by {gap:.3e} MW")
    lam = sol.prices if sol.prices is not None else np.full(prob.T, np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "demand_mw", "g_mw", "u_mw", "soc", "lambda"])
        for t in range(prob.T):
            # soc is the state at the end of slot t
            w.writerow([t, _fmt(prob.D[t]), _fmt(sol.g[t]), _fmt(sol.u[t]), _fmt(sol.x[t + 1]), _fmt(lam[t])])


def write_summary_csv(solutions: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "generation_cost", "cycling_cost", "hidden_cycling_cost", "total_cost",
                    "kkt_residual", "converged"])
        for s in solutions:
            hidden = s.strategy == "GCD"
            w.writerow([s.strategy, _fmt(s.generation_cost), "" if hidden else _fmt(s.cycling_cost),
                        _fmt(s.cycling_cost) if hidden else "", _fmt(s.total_cost), _fmt(s.kkt_residual),
                        str(bool(s.converged)).lower()])


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0 if lo == 0 else lo + abs(lo) * 0.1
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    if ticks[-1] < hi:
        ticks.append(round(v, 12))
    return ticks


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def emit_svg_plot(series: dict, path, *, x=None, title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    """Write a self-contained SVG line chart, one polyline per entry of ``series``.

    Output is a pure function of the inputs. Non-finite points break the
    polyline into separate segments.
    """
    if not series:
        raise ValueError("nothing to plot: no series given")
    names = list(series)
    ys = [np.asarray(series[k], dtype=float).reshape(-1) for k in names]
    n = ys[0].size
    if n == 0 or any(y.size != n for y in ys):
        raise ValueError("series must be nonempty and of equal length")
    xs = np.arange(n, dtype=float) if x is None else np.asarray(x, dtype=float).reshape(-1)
    if xs.size != n:
        raise ValueError("x must have the same length as the series")
    finite = np.concatenate([y[np.isfinite(y)] for y in ys])
    if finite.size == 0:
        raise ValueError("all plotted values are non-finite")

    W, H, L, R, TOP, BOT = 720, 440, 90, 170, 40, 60
    pw, ph = W - L - R, H - TOP - BOT
    xt = _nice_ticks(float(xs.min()), float(xs.max()))
    yt = _nice_ticks(float(finite.min()), float(finite.max()))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]

    def px(v):
        return L + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
           'font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    if title:
        out.append(f'<text x="{L + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for v in yt:
        out.append(f'<line x1="{L}" y1="{py(v):.2f}" x2="{L + pw}" y2="{py(v):.2f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{L - 6}" y="{py(v) + 4:.2f}" text-anchor="end">{v:.6g}</text>')
    for v in xt:
        out.append(f'<line x1="{px(v):.2f}" y1="{TOP + ph}" x2="{px(v):.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{v:.6g}</text>')
    out.append(f'<line x1="{L}" y1="{TOP + ph}" x2="{L + pw}" y2="{TOP + ph}" stroke="black"/>')
    out.append(f'<line x1="{L}" y1="{TOP}" x2="{L}" y2="{TOP + ph}" stroke="black"/>')
    if xlabel:
        out.append(f'<text x="{L + pw / 2:.2f}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="18" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {TOP + ph / 2:.2f})">{escape(ylabel)}</text>')
    for i, (name, y) in enumerate(zip(names, ys)):
        color = _COLORS[i % len(_COLORS)]
        segment = []
        for xv, yv in list(zip(xs, y)) + [(np.nan, np.nan)]:
            if np.isfinite(yv) and np.isfinite(xv):
                segment.append(f"{px(xv):.2f},{py(yv):.2f}")
                continue
            if segment:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(segment)}"/>')
            segment = []
        ly = TOP + 10 + 20 * i
        out.append(f'<line x1="{L + pw + 15}" y1="{ly}" x2="{L + pw + 40}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{L + pw + 46}" y="{ly + 4}">{escape(str(name))}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------- commands


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_rainflow_command(args) -> int:
    profile = load_soc_csv(args.soc)
    out = _out_dir(RunConfig(out_dir=args.out or "."))
    path = out / "cycles.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "depth", "kind", "start_t", "end_t"])
        for row in half_cycle_table(profile):
            w.writerow([row["index"], _fmt(row["depth"]), row["kind"], row["start_t"], row["end_t"]])
    print(f"wrote {path}")
    return 0


def run_dispatch_command(args) -> int:
    cfg = build_config(args)
    prob = cfg.problem()
    out = _out_dir(cfg)
    solutions, failed = [], []
    for strategy in STRATEGIES:
        if strategy not in cfg.strategies:
            continue
        try:
            sol = _solve(strategy, prob)
            write_solution_csv(sol, prob, out / f"solution_{strategy.lower()}.csv")
        except (InfeasibleProblemError, SolverError) as exc:
            print(f"error: {strategy}: {exc}", file=sys.stderr)
            failed.append(strategy)
            continue
        if not sol.converged:
            print(f"warning: {strategy} did not converge (KKT residual {sol.kkt_residual:.2e})", file=sys.stderr)
        solutions.append(sol)
    write_summary_csv(solutions, out / "summary.csv")
    if cfg.plot and solutions:
        emit_svg_plot({s.strategy: s.prices for s in solutions if s.prices is not None}, out / "prices.svg",
                      title="Clearing price", xlabel="slot", ylabel="$/MWh")
    for s in solutions:
        print(f"{s.strategy}: total {s.total_cost:.6f}  kkt {s.kkt_residual:.2e}")
    return 1 if failed else 0


def sweep_point(prob, variable: str, value: float) -> tuple:
    """``(cost_sdad, cost_gcd_total, cost_gcd_hidden, cost_gd)`` at one sweep value."""
    p = prob.replace(**{variable: value})
    if variable == "E":
        p = p.replace(u_min=-value / 4, u_max=value / 4)
    sdad = solve_sdad(p)
    gcd = solve_gcd(p)
    gd = solve_gd(p)
    return sdad.total_cost, gcd.total_cost, gcd.cycling_cost, gd.total_cost


def run_sweep_command(args) -> int:
    cfg = build_config(args)
    if cfg.sweep is None:
        raise ConfigurationError("sweep needs --sweep VAR:START:STOP:STEPS or a 'sweep' config entry")
    sp = cfg.sweep
    if sp.variable == "E" and {"u_min", "u_max"} & set(cfg.params):
        print("note: fixed u_min/u_max are replaced by +-E/4 at each sweep point", file=sys.stderr)
    prob = cfg.problem()
    out = _out_dir(cfg)
    rows, failed = [], 0
    for v in sp.values():
        try:
            costs = sweep_point(prob, sp.variable, float(v))
        except (InfeasibleProblemError, SolverError, ConfigurationError) as exc:
            print(f"error: {sp.variable}={v}: {exc}", file=sys.stderr)
            costs = (math.nan,) * 4
            failed += 1
        rows.append((float(v), *costs))
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep_value", "cost_sdad", "cost_gcd_total", "cost_gcd_hidden", "cost_gd"])
        for r in rows:
            w.writerow([_fmt(c) for c in r])
    if cfg.plot:
        arr = np.array(rows)
        emit_svg_plot({"SDAD": arr[:, 1], "GCD total": arr[:, 2], "GCD hidden": arr[:, 3], "GD": arr[:, 4]},
                      out / "sweep.svg", x=arr[:, 0], title=f"Cost versus {sp.variable}",
                      xlabel=sp.variable, ylabel="$")
    print(f"wrote {path} ({len(rows)} points, {failed} failed)")
    return 1 if failed else 0


def run_verify_command(args) -> int:
    cfg = build_config(args)
    prob = cfg.problem()
    out = _out_dir(cfg)
    sol = solve_sdad(prob)
    prices = extract_prices(sol, prob)
    report = verify_incentive_compatibility(sol, prices, prob)
    report.certificate = uniqueness_certificate(sol.x, prob)
    payload = report.to_dict()
    payload["kkt_residual"] = kkt_residual(sol, prob).residual
    path = out / "report.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}: pass={report.passed} unique={report.certificate.unique}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degdispatch", description="Cycling-cost-aware generator/storage dispatch.")
    sub = parser.add_subparsers(dest="command", required=True)

    rf = sub.add_parser("rainflow", help="count half-cycles of a SoC profile (CSV t,soc)")
    rf.add_argument("soc", help="CSV file with header t,soc")
    rf.add_argument("--out", help="output directory (default: .)")
    rf.set_defaults(func=run_rainflow_command)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--demand", help="demand CSV with header t,demand_mw (default: synthetic)")
        p.add_argument("--out", help="output directory (default: .)")
        p.add_argument("--plot", action="store_true", help="also write an SVG chart")

    d = sub.add_parser("dispatch", help="solve one instance with each strategy")
    common(d)
    d.add_argument("--strategy", help="comma-separated subset of sdad,gcd,gd")
    d.set_defaults(func=run_dispatch_command)

    s = sub.add_parser("sweep", help="total costs over a range of B or E")
    common(s)
    s.add_argument("--sweep", help="VAR:START:STOP:STEPS with VAR in {B,E}, e.g. B:25:300:12")
    s.set_defaults(func=run_sweep_command)

    v = sub.add_parser("verify", help="solve SDAD and check incentive compatibility and uniqueness")
    common(v)
    v.set_defaults(func=run_verify_command)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleProblemError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
