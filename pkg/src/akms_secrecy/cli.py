"""Command-line sweep runner: JSON config in, CSV curves out.

Subcommands: ``sweep``, ``point``, ``converge`` and ``presets``. Mean SNRs
are given in dB in the config and converted to linear scale exactly once,
when the config is parsed into scenarios.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import channel, montecarlo, secrecy
from .channel import ChannelParams, SeriesControl
from .errors import AkmsError
from .montecarlo import SimConfig
from .secrecy import SecrecyScenario

METRICS = ("sop_exact", "sop_numeric", "sop_asymptotic", "spsc", "asc", "mc_all")
LINK_FIELDS = ("alpha", "kappa", "mu", "m", "mean_snr_db")
# sweep variable -> (links touched, field)
SWEEP_VARIABLES = {
    "mean_snr_h_db": (("main",), "mean_snr_db"),
    "mean_snr_k_db": (("eve",), "mean_snr_db"),
    "alpha": (("main", "eve"), "alpha"),
    "alpha_h": (("main",), "alpha"),
    "alpha_k": (("eve",), "alpha"),
    "kappa_h": (("main",), "kappa"),
    "kappa_k": (("eve",), "kappa"),
    "mu_h": (("main",), "mu"),
    "mu_k": (("eve",), "mu"),
    "m_h": (("main",), "m"),
    "m_k": (("eve",), "m"),
    "rate_target": ((), "rate_target"),
}
CONVERGE_METRICS = ("sop_exact", "sop_asymptotic", "spsc", "asc")
TERM_COUNTS = (5, 10, 20, 40)
EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    step: float

    def values(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(max(n, 0))]


@dataclass(frozen=True)
class SweepPoint:
    curve: int
    label: str
    x: float
    scenario: SecrecyScenario


@dataclass(frozen=True)
class RunConfig:
    name: str
    base: SecrecyScenario
    sweep: SweepSpec | None
    metrics: tuple[str, ...]
    series: SeriesControl
    sim: SimConfig
    points: tuple[SweepPoint, ...]
    output: str | None = None


# ---------------------------------------------------------------------------
# config parsing


def _link(doc: dict, which: str) -> ChannelParams:
    missing = [f for f in LINK_FIELDS if f not in doc]
    if missing:
        raise ConfigError(f"{which} link is missing {', '.join(missing)}")
    extra = set(doc) - set(LINK_FIELDS)
    if extra:
        raise ConfigError(f"{which} link has unknown keys {sorted(extra)}")
    return ChannelParams.from_db(doc["alpha"], doc["kappa"], doc["mu"], doc["m"], doc["mean_snr_db"])


def _scenario(main: dict, eve: dict, rate: float) -> SecrecyScenario:
    return SecrecyScenario(_link(main, "main"), _link(eve, "eve"), float(rate))


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document and expand it into concrete sweep points."""
    try:
        main, eve = dict(doc["main"]), dict(doc["eve"])
    except KeyError as exc:
        raise ConfigError(f"config needs a {exc.args[0]!r} section") from None
    rate = float(doc.get("rate_target", 0.0))
    metrics = tuple(doc.get("metrics", ()))
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise ConfigError(f"unknown metrics {unknown}; choose from {list(METRICS)}")
    series = SeriesControl(**doc.get("series", {}))
    sim = SimConfig(**doc.get("sim", {}))

    sweep = None
    if doc.get("sweep"):
        sd = doc["sweep"]
        sweep = SweepSpec(str(sd["variable"]), float(sd["start"]), float(sd["stop"]), float(sd["step"]))
        if sweep.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable {sweep.variable!r} not in {sorted(SWEEP_VARIABLES)}")
        if not sweep.step > 0:
            raise ConfigError("sweep step must be > 0")

    curves = doc.get("curves") or [{}]
    points = []
    for ci, cur in enumerate(curves):
        c_main = {**main, **cur.get("main", {})}
        c_eve = {**eve, **cur.get("eve", {})}
        c_rate = float(cur.get("rate_target", rate))
        label = str(cur.get("label", f"curve{ci}"))
        for v in sweep.values() if sweep else [math.nan]:
            pm, pe, pr = copy.copy(c_main), copy.copy(c_eve), c_rate
            if sweep:
                links, fld = SWEEP_VARIABLES[sweep.variable]
                if fld == "rate_target":
                    pr = v
                for name in links:
                    (pm if name == "main" else pe)[fld] = v
            points.append(SweepPoint(ci, label, v, _scenario(pm, pe, pr)))
    return RunConfig(
        name=str(doc.get("name", "run")),
        base=_scenario(main, eve, rate),
        sweep=sweep,
        metrics=metrics,
        series=series,
        sim=sim,
        points=tuple(points),
        output=doc.get("output"),
    )


def preset_names() -> list[str]:
    files = resources.files("akms_secrecy").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_document(ref: str) -> dict:
    """Read a config from a path, or from a shipped preset by name."""
    path = Path(ref)
    if path.exists():
        return json.loads(path.read_text())
    if ref in preset_names():
        return json.loads(resources.files("akms_secrecy").joinpath("presets", ref + ".json").read_text())
    raise ConfigError(f"no config file or preset named {ref!r}")


def load_config(ref: str) -> RunConfig:
    return parse_config(load_document(ref))


# ---------------------------------------------------------------------------
# metric evaluation


def _columns(metric: str) -> list[str]:
    return {
        "sop_exact": ["sop_exact", "sop_exact_err", "sop_exact_terms"],
        "sop_numeric": ["sop_numeric", "sop_numeric_err", "sop_numeric_evals"],
        "sop_asymptotic": ["sop_asymptotic", "sop_asymptotic_err", "sop_asymptotic_terms"],
        "spsc": ["spsc", "spsc_err", "spsc_terms"],
        "asc": ["asc_nats", "asc_bits", "asc_err", "asc_evals"],
        "mc_all": [
            "mc_sop", "mc_sop_se", "mc_spsc", "mc_spsc_se",
            "mc_asc_clipped", "mc_asc_clipped_se", "mc_asc_unclipped", "mc_asc_unclipped_se",
        ],
    }[metric]


def _result_cols(r) -> list:
    return [r.value, r.error_estimate, r.terms_or_evals]


def evaluate(metric: str, s: SecrecyScenario, ctrl: SeriesControl, sim: SimConfig) -> list:
    if metric == "sop_exact":
        return _result_cols(secrecy.sop_lower_exact(s, ctrl))
    if metric == "sop_numeric":
        return _result_cols(secrecy.sop_lower_numeric(s))
    if metric == "sop_asymptotic":
        return _result_cols(secrecy.sop_asymptotic(s, ctrl))
    if metric == "spsc":
        return _result_cols(secrecy.spsc(s, ctrl))
    if metric == "asc":
        b = secrecy.asc(s, ctrl)
        return [b.asc_nats, b.asc_bits, b.error_estimate, b.evals]
    mc = montecarlo.estimate_all(s, sim)
    out = []
    for e in (mc.sop, mc.spsc, mc.asc_clipped, mc.asc_unclipped):
        out += [e.mean, e.std_error]
    return out


def _evaluate_point(pt: SweepPoint, cfg: RunConfig) -> tuple[list, list[str]]:
    row, errors = [], []
    for metric in cfg.metrics:
        try:
            row += evaluate(metric, pt.scenario, cfg.series, cfg.sim)
        except (AkmsError, ArithmeticError, ValueError) as exc:
            row += [math.nan] * len(_columns(metric))
            errors.append(f"{metric}:{type(exc).__name__}:{exc}")
    return row, errors


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format(float(v), ".17g")
    return str(v)


def sweep_header(cfg: RunConfig) -> list[str]:
    head = ["curve", "label", cfg.sweep.variable if cfg.sweep else "point"]
    for m in cfg.metrics:
        head += _columns(m)
    return head + ["error"]


def run_sweep(cfg: RunConfig, jobs: int = 1) -> tuple[list[str], list[list], int]:
    """Evaluate every sweep point. Returns header, rows and the failed-row count.

    With ``jobs > 1`` points run on a thread pool; rows keep sweep order.
    An empty metric list yields a header with no rows.
    """
    header = sweep_header(cfg)
    if not cfg.metrics:
        return header, [], 0
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda p: _evaluate_point(p, cfg), cfg.points))
    else:
        results = [_evaluate_point(p, cfg) for p in cfg.points]
    rows, failed = [], 0
    for pt, (vals, errs) in zip(cfg.points, results):
        failed += bool(errs)
        rows.append([pt.curve, pt.label, pt.x] + vals + [" | ".join(errs)])
    return header, rows, failed


def format_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# single point report


def _params_dict(p: ChannelParams) -> dict:
    return {
        "alpha": p.alpha, "kappa": p.kappa, "mu": p.mu, "m": p.m,
        "mean_snr": p.mean_snr, "mean_snr_db": 10 * math.log10(p.mean_snr),
    }


def _link_checks(p: ChannelParams, ctrl: SeriesControl) -> dict:
    grid = [f * p.mean_snr for f in (0.1, 0.5, 1.0, 2.0, 5.0)]
    checks = []
    for g in grid:
        gen = channel.cdf_general_detail(p, g, ctrl)
        dens = channel.pdf_series(p, g, ctrl)
        item = {
            "gamma": g,
            "cdf_general": gen.value,
            "cdf_general_terms": gen.terms_used,
            "cdf_general_bound": gen.trunc_estimate,
            "pdf": channel.pdf(p, g),
            "pdf_series": dens.value,
            "pdf_series_terms": dens.terms_used,
            "pdf_series_bound": dens.trunc_estimate,
        }
        if channel.is_integer_mu(p.mu):
            fin = channel.cdf_series_detail(p, g, ctrl)
            item.update(cdf_series=fin.value, cdf_series_terms=fin.terms_used, cdf_series_bound=fin.trunc_estimate)
        if p.alpha == 2 and p.kappa == 0 and p.mu == 1:
            item["exponential_reference"] = -math.expm1(-g / p.mean_snr)
        checks.append(item)
    dc = channel.derive_constants(p)
    return {
        "params": _params_dict(p),
        "constants": {"alpha_tilde": dc.alpha_tilde, "c": dc.c, "a": dc.a, "b": dc.b, "d": dc.d},
        "diversity_gain": secrecy.diversity_gain(p),
        "cdf_checks": checks,
    }


def _metric_dict(r) -> dict:
    return {
        "value": r.value, "error_estimate": r.error_estimate,
        "terms_or_evals": r.terms_or_evals, "method": r.method, "clamped": r.clamped,
    }


def run_point(cfg: RunConfig, mc: bool = True) -> tuple[dict, int]:
    """Full report for the base scenario of a config."""
    s, ctrl = cfg.base, cfg.series
    report: dict = {
        "name": cfg.name,
        "rate_target": s.rate_target,
        "phi": secrecy.threshold_phi(s.rate_target),
        "series_control": {"max_terms": ctrl.max_terms, "rel_tol": ctrl.rel_tol, "hard_cap": ctrl.hard_cap},
        "metrics": {},
        "errors": {},
    }
    calls = {
        "sop_exact": lambda: _metric_dict(secrecy.sop_lower_exact(s, ctrl)),
        "sop_numeric": lambda: _metric_dict(secrecy.sop_lower_numeric(s)),
        "sop_asymptotic": lambda: _metric_dict(secrecy.sop_asymptotic(s, ctrl)),
        "spsc": lambda: _metric_dict(secrecy.spsc(s, ctrl)),
    }
    for name, fn in calls.items():
        try:
            report["metrics"][name] = fn()
        except (AkmsError, ArithmeticError, ValueError) as exc:
            report["errors"][name] = f"{type(exc).__name__}: {exc}"
    try:
        b = secrecy.asc(s, ctrl)
        report["asc"] = {
            "im1": b.im1, "im2": b.im2, "im3": b.im3, "asc_nats": b.asc_nats,
            "asc_bits": b.asc_bits, "errors": list(b.errors), "evals": b.evals,
        }
    except (AkmsError, ArithmeticError, ValueError) as exc:
        report["errors"]["asc"] = f"{type(exc).__name__}: {exc}"
    if mc:
        r = montecarlo.estimate_all(s, cfg.sim)
        report["montecarlo"] = {
            "n_samples": cfg.sim.n_samples,
            "seed": cfg.sim.seed,
            **{
                k: {"mean": e.mean, "std_error": e.std_error}
                for k, e in (("sop", r.sop), ("spsc", r.spsc), ("asc_clipped", r.asc_clipped),
                             ("asc_unclipped", r.asc_unclipped))
            },
        }
    report["links"] = {"main": _link_checks(s.main, ctrl), "eve": _link_checks(s.eve, ctrl)}
    return report, len(report["errors"])


# ---------------------------------------------------------------------------
# convergence report


def _converge_value(metric: str, s: SecrecyScenario, ctrl: SeriesControl) -> float:
    if metric == "sop_exact":
        return secrecy.sop_lower_exact(s, ctrl).value
    if metric == "sop_asymptotic":
        return secrecy.sop_asymptotic(s, ctrl).value
    if metric == "spsc":
        return secrecy.spsc(s, ctrl).value
    return secrecy.asc(s, ctrl).asc_nats


def convergence_report(cfg: RunConfig, term_counts=TERM_COUNTS, rel_tol: float = 1e-15) -> list[dict]:
    """Series metrics re-evaluated with the j-series cut at each term count.

    ``rel_tol`` is tiny so the cut, not the early-stop rule, decides how
    many terms are used. Each row holds the values per term count and the
    relative change between consecutive counts.
    """
    metrics = [m for m in cfg.metrics if m in CONVERGE_METRICS] or ["sop_exact"]
    rows = []
    for pt in cfg.points:
        for metric in metrics:
            vals, err = [], ""
            try:
                for n in term_counts:
                    ctrl = SeriesControl(max_terms=n, rel_tol=rel_tol, hard_cap=max(n + 1, cfg.series.hard_cap))
                    vals.append(_converge_value(metric, pt.scenario, ctrl))
            except (AkmsError, ArithmeticError, ValueError) as exc:
                err = f"{type(exc).__name__}: {exc}"
                vals += [math.nan] * (len(term_counts) - len(vals))
            changes = [
                abs(b - a) / abs(b) if b != 0 else (0.0 if a == b else math.inf)
                for a, b in zip(vals[:-1], vals[1:])
            ]
            rows.append({
                "curve": pt.curve, "label": pt.label, "x": pt.x, "metric": metric,
                "values": vals, "rel_changes": changes, "error": err,
            })
    return rows


def format_convergence(rows: list[dict], term_counts=TERM_COUNTS, claim_terms=(20, 40), claim_tol=1e-4) -> str:
    i = term_counts.index(claim_terms[1]) - 1
    lines = [
        f"{'curve':>5} {'x':>8} {'metric':<15}"
        + "".join(f" {'N=' + str(n):>12}" for n in term_counts)
        + "".join(f" {'d' + str(a) + '->' + str(b):>10}" for a, b in zip(term_counts[:-1], term_counts[1:]))
    ]
    worst = 0.0
    for r in rows:
        x = "-" if math.isnan(r["x"]) else f"{r['x']:g}"
        lines.append(
            f"{r['curve']:>5} {x:>8} {r['metric']:<15}"
            + "".join(f" {v:>12.6g}" for v in r["values"])
            + "".join(f" {c:>10.2e}" for c in r["rel_changes"])
            + (f"  ERROR {r['error']}" if r["error"] else "")
        )
        c = r["rel_changes"][i]
        worst = max(worst, c if not math.isnan(c) else math.inf)
    verdict = "holds" if worst < claim_tol else "does not hold"
    lines.append(
        f"max relative change {claim_terms[0]}->{claim_terms[1]} terms: {worst:.3e} "
        f"(claim < {claim_tol:g}: {verdict})"
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="akms-secrecy", description="Secrecy metrics for AKMS wiretap channels.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, mc=True):
        p.add_argument("--config", required=True, help="JSON config path or preset name (fig1..fig5)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="override the Monte-Carlo seed")
        if mc:
            p.add_argument("--mc", dest="mc", action="store_true", default=None, help="include Monte-Carlo")
            p.add_argument("--no-mc", dest="mc", action="store_false", help="skip Monte-Carlo")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")

    common(sub.add_parser("sweep", help="evaluate a sweep and write CSV"))
    common(sub.add_parser("point", help="full JSON report for the base scenario"))
    common(sub.add_parser("converge", help="term-count convergence table"), mc=False)
    sub.add_parser("presets", help="list shipped figure presets")
    return ap


def _apply_overrides(doc: dict, args) -> dict:
    doc = copy.deepcopy(doc)
    if args.seed is not None:
        doc.setdefault("sim", {})["seed"] = args.seed
    mc = getattr(args, "mc", None)
    if mc is not None:
        metrics = [m for m in doc.get("metrics", []) if m != "mc_all"]
        if mc:
            metrics.append("mc_all")
        doc["metrics"] = metrics
    return doc


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "presets":
        for name in preset_names():
            doc = load_document(name)
            print(f"{name}\t{doc.get('description', '')}")
        return EXIT_OK
    try:
        doc = _apply_overrides(load_document(args.config), args)
        cfg = parse_config(doc)
    except (ConfigError, AkmsError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out or cfg.output
    if args.command == "sweep":
        header, rows, failed = run_sweep(cfg, jobs=args.jobs)
        _emit(format_csv(header, rows), out)
        return EXIT_FAILED if failed else EXIT_OK
    if args.command == "point":
        mc = "mc_all" in cfg.metrics if args.mc is None else args.mc
        report, failed = run_point(cfg, mc=mc)
        _emit(json.dumps(report, indent=2, default=float) + "\n", out)
        return EXIT_FAILED if failed else EXIT_OK
    rows = convergence_report(cfg)
    text = format_convergence(rows)
    _emit(text, out)
    return EXIT_FAILED if any(r["error"] for r in rows) else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
