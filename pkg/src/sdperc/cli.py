"""Batch command-line front end.

One flat key=value config (file plus --set overrides) drives every
subcommand.  Primary outputs (results.jsonl, summary.csv,
config.resolved.txt) are byte-deterministic given the config; wall-clock
timing goes to a separate non-golden sidecar.

Exit codes: 0 success, 2 config error, 3 resource/extent error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .edgefield import SeedKey
from .estimators import (
    BoundParams,
    CrossingSampler,
    ReachCountSampler,
    RobustCrossingSampler,
    event_probability,
    exponent_fit,
    markov_site_bound,
    one_arm_estimate,
    peierls_bound,
    removal_union_bound,
    subtraction_scan,
)
from .events import CoarseParams, coarse_good_field, coarse_percolation_check
from .geometry import BoxRegion, ExtentError
from .sdp import proxy_rule_from_str, proxy_rule_to_str, sdp_triple, serialize_triple


class ConfigError(ValueError):
    """Invalid experiment configuration; message is location-addressed."""


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 2
    extent: int = 20
    ell: int = 1
    L: int = 2
    M: int = 10
    p: float = 0.5
    eps: float = 0.1
    p_c_input: float = 0.5
    C: float = 1.0
    c: float = 1.0
    eta: float = 0.1
    replicas: int = 100
    experiment_seed: int = 1
    proxy_rule: str = "boundary"
    grid_radius: int = 1
    arm_lengths: tuple = (1, 2, 4, 8)
    p_grid: tuple = ()
    event: str = "reach_count"

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_INT_KEYS = {"dimension", "extent", "ell", "L", "M", "replicas",
             "experiment_seed", "grid_radius"}
_FLOAT_KEYS = {"p", "eps", "p_c_input", "C", "c", "eta"}
_INT_TUPLE_KEYS = {"arm_lengths"}
_FLOAT_TUPLE_KEYS = {"p_grid"}
_STR_KEYS = {"proxy_rule", "event"}
_ALL_KEYS = (_INT_KEYS | _FLOAT_KEYS | _INT_TUPLE_KEYS | _FLOAT_TUPLE_KEYS
             | _STR_KEYS)


def _parse_value(key: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_TUPLE_KEYS:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if key in _FLOAT_TUPLE_KEYS:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {raw!r} for {key}")


def _apply_setting(settings: dict, key: str, raw: str, where: str) -> None:
    key = key.strip()
    if key not in _ALL_KEYS:
        raise ConfigError(f"{where}: unknown configuration key {key!r}")
    settings[key] = _parse_value(key, raw, where)


def load_config(path: str | None, overrides, seed=None, replicas=None,
                ) -> ExperimentConfig:
    settings: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc})")
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = stripped.split("=", 1)
            _apply_setting(settings, key, raw, f"{path}:{lineno}")
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        _apply_setting(settings, key, raw, f"--set {key.strip()}")
    if seed is not None:
        settings["experiment_seed"] = seed
    if replicas is not None:
        settings["replicas"] = replicas
    config = ExperimentConfig(**settings)
    _validate_common(config)
    return config


def _validate_common(config: ExperimentConfig) -> None:
    if config.dimension < 2:
        raise ConfigError("dimension: must be at least 2")
    if config.replicas < 1:
        raise ConfigError("replicas: must be at least 1")
    for key in ("p", "eps", "p_c_input", "eta"):
        v = getattr(config, key)
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"{key}: {v} outside [0, 1]")
    if config.L < 1 or config.ell < 0:
        raise ConfigError("L must be >= 1 and ell >= 0")
    if config.proxy_rule != "auto":
        try:
            proxy_rule_from_str(config.proxy_rule)
        except ValueError as exc:
            raise ConfigError(f"proxy_rule: {exc}")


def _resolved_rule(config: ExperimentConfig):
    if config.proxy_rule == "auto":
        from .sdp import RadiusAtLeast

        return RadiusAtLeast(config.L)
    return proxy_rule_from_str(config.proxy_rule)


# ---------------------------------------------------------------------------
# output plumbing

class OutputWriter:
    def __init__(self, out_dir: str, subcommand: str,
                 config: ExperimentConfig):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.subcommand = subcommand
        self.config = config
        self.records: list = []
        self.summary_rows: list = []
        self.summary_fields: list = []

    def add_record(self, record: dict) -> None:
        full = {"subcommand": self.subcommand,
                "config": self.config.to_dict()}
        full.update(record)
        self.records.append(full)

    def add_summary(self, row: dict) -> None:
        for k in row:
            if k not in self.summary_fields:
                self.summary_fields.append(k)
        self.summary_rows.append(row)

    def flush(self, elapsed: float) -> None:
        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        (self.dir / "results.jsonl").write_text(
            "".join(line + "\n" for line in lines))
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.summary_fields,
                                lineterminator="\n")
        writer.writeheader()
        for row in self.summary_rows:
            writer.writerow(row)
        (self.dir / "summary.csv").write_text(buf.getvalue())
        resolved = [f"sdperc {__version__}", f"subcommand = {self.subcommand}"]
        for k, v in sorted(self.config.to_dict().items()):
            resolved.append(f"{k} = {v}")
        (self.dir / "config.resolved.txt").write_text(
            "".join(line + "\n" for line in resolved))
        # timing is quarantined from the golden outputs
        (self.dir / "timing.txt").write_text(f"elapsed_seconds={elapsed}\n")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_one_arm(config: ExperimentConfig, out: OutputWriter) -> None:
    if not config.arm_lengths:
        raise ConfigError("arm_lengths: need at least one value")
    if max(config.arm_lengths) > config.extent:
        raise ExtentError(
            f"constraint max(arm_lengths) <= extent violated: "
            f"{max(config.arm_lengths)} > {config.extent}")
    pairs = []
    for n in config.arm_lengths:
        est = one_arm_estimate(config.experiment_seed, config.p, n,
                               config.replicas, dimension=config.dimension)
        pairs.append((n, est))
        out.add_record({"n": n, "estimate": est.to_record()})
        out.add_summary({"n": n, "mean": est.mean, "ci_low": est.ci_low,
                         "ci_high": est.ci_high, "replicas": est.replicas})
    positive = [(n, e) for n, e in pairs if e.mean > 0]
    if len(positive) >= 3:
        fit = exponent_fit(positive, replicas=config.replicas)
        out.add_record({"fit": {"slope": fit.slope, "stderr": fit.stderr,
                                "intercept": fit.intercept,
                                "points_used": fit.points_used}})


def _cmd_sdp(config: ExperimentConfig, out: OutputWriter) -> None:
    region = BoxRegion((0,) * config.dimension, config.extent)
    key = SeedKey(config.experiment_seed, 0)
    triple = sdp_triple(key, region, config.p, config.eps,
                        rule=_resolved_rule(config))
    (out.dir / "sdp_triple.bin").write_bytes(serialize_triple(triple))
    layers = {"initial": triple.initial, "burnt": triple.burnt,
              "regrowth": triple.regrowth, "recovered": triple.recovered}
    for name, layer in layers.items():
        out.add_record({"layer": name, "open_edges": layer.open_count,
                        "density": layer.density()})
        out.add_summary({"layer": name, "open_edges": layer.open_count,
                         "density": layer.density()})
    out.add_record({"proxy_sites": triple.proxy.n_sites,
                    "proxy_rule": proxy_rule_to_str(triple.proxy.rule)})


def _cmd_renorm(config: ExperimentConfig, out: OutputWriter) -> None:
    needed = (config.grid_radius + 4) * config.L
    if config.extent < needed:
        raise ExtentError(
            f"constraint extent >= (grid_radius + 4) * L violated: "
            f"{config.extent} < {needed}")
    params = CoarseParams(
        dimension=config.dimension, p=config.p, eps=config.eps,
        p_c_input=config.p_c_input, ell=config.ell, L=config.L, M=config.M,
        proxy_rule=config.proxy_rule)
    key = SeedKey(config.experiment_seed, 0)
    field = coarse_good_field(key, params, config.grid_radius)
    report = coarse_percolation_check(field)
    (out.dir / "field.txt").write_text(field.serialize())
    for detail in field.site_details:
        rec = dict(detail)
        rec["coarse_site"] = list(rec["coarse_site"])
        out.add_record(rec)
    out.add_record({"check": report.to_record(), "density": field.density})
    out.add_summary({"good_density": field.density,
                     "crossing": report.crossing,
                     "largest_component_fraction":
                         report.largest_component_fraction,
                     "chain_links_checked": report.chain_links_checked,
                     "chain_links_ok": report.chain_links_ok})


def _cmd_events(config: ExperimentConfig, out: OutputWriter) -> None:
    if config.ell > 3 * config.L:
        raise ExtentError("constraint ell <= 3 * L violated")
    if config.extent < 4 * config.L:
        raise ExtentError(
            f"constraint extent >= 4 * L violated: "
            f"{config.extent} < {4 * config.L}")
    q = config.p_c_input + config.eps
    if q > 1.0:
        raise ConfigError("p_c_input + eps exceeds 1")
    if config.event == "reach_count":
        sampler = ReachCountSampler(config.dimension, config.ell, config.L,
                                    config.M, config.p)
    elif config.event == "crossing":
        sampler = CrossingSampler(config.dimension, config.ell, config.L, q)
    elif config.event == "robust_crossing":
        sampler = RobustCrossingSampler(config.dimension, config.ell,
                                        config.L, config.p, q,
                                        _resolved_rule(config))
    else:
        raise ConfigError(f"event: unknown kind {config.event!r}")
    report = event_probability(sampler, config.experiment_seed,
                               config.replicas)
    out.add_record(report.to_record())
    est = report.estimate
    out.add_summary({"event": config.event, "mean": est.mean,
                     "ci_low": est.ci_low, "ci_high": est.ci_high,
                     "replicas": est.replicas})


def _cmd_bounds(config: ExperimentConfig, out: OutputWriter) -> None:
    m = markov_site_bound(config.ell, config.C, config.eta, config.dimension)
    out.add_record({"bound": "markov_site_bound", "value": m})
    out.add_summary({"bound": "markov_site_bound", "value": m})
    pb = peierls_bound(config.ell, config.L)
    out.add_record({"bound": "peierls_bound", "value": pb})
    out.add_summary({"bound": "peierls_bound", "value": pb})
    params = BoundParams(d=config.dimension, ell=config.ell, L=config.L,
                         M=config.M, eps=config.eps, eta=config.eta,
                         p_c_input=config.p_c_input, C=config.C, c=config.c)
    ub = removal_union_bound(params)
    out.add_record({"bound": "removal_union_bound", "value": ub.value,
                    "log_value": ub.log_value,
                    "min_L_below_eta": ub.min_L_below_eta})
    out.add_summary({"bound": "removal_union_bound", "value": ub.value})


def _cmd_scan(config: ExperimentConfig, out: OutputWriter) -> None:
    if not config.p_grid:
        raise ConfigError("p_grid: need at least one value")
    report = subtraction_scan(
        config.experiment_seed, config.dimension, config.extent,
        config.p_c_input, config.eps, config.p_grid, config.replicas,
        rule=_resolved_rule(config))
    for row in report.rows:
        rec = row.to_record()
        rec["report_only"] = True
        out.add_record(rec)
        out.add_summary({"p": row.p, "crossing_mean": row.estimate.mean,
                         "ci_low": row.estimate.ci_low,
                         "ci_high": row.estimate.ci_high})
    out.add_record({"monotone_trend": report.monotone_trend,
                    "trend_violations": report.trend_violations,
                    "report_only": True})


def _cmd_selftest(config: ExperimentConfig, out: OutputWriter) -> int:
    from . import selftest

    failures = 0
    for name, fn in selftest.CHECKS:
        try:
            fn()
            status = "PASS"
        except Exception as exc:  # report and continue
            status = f"FAIL: {exc}"
            failures += 1
        print(f"selftest {name}: {status}")
        out.add_record({"check": name, "status": status})
        out.add_summary({"check": name, "passed": status == "PASS"})
    return failures


_SUBCOMMANDS = {
    "one-arm": _cmd_one_arm,
    "sdp": _cmd_sdp,
    "renorm": _cmd_renorm,
    "events": _cmd_events,
    "bounds": _cmd_bounds,
    "scan": _cmd_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdperc",
        description="Self-destructive bond percolation simulation lab")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in list(_SUBCOMMANDS) + ["selftest"]:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="flat key = value configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override experiment_seed")
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override one configuration key")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    try:
        config = load_config(args.config, args.set, seed=args.seed,
                             replicas=args.replicas)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = OutputWriter(args.out, args.subcommand, config)
    try:
        if args.subcommand == "selftest":
            failures = _cmd_selftest(config, out)
            out.flush(time.monotonic() - t0)
            return 1 if failures else 0
        _SUBCOMMANDS[args.subcommand](config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ExtentError as exc:
        print(f"extent error: {exc}", file=sys.stderr)
        return 3
    out.flush(time.monotonic() - t0)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
