"""Reproducible Monte Carlo experiments over replicates, horizons and estimators.

Replicate ``r`` draws every path from ``RngStream(seed, r)``; horizon ``i`` of a
replicate uses counter block ``i`` of that stream, so paths at different
horizons are independent and no draw depends on scheduling.
"""

from concurrent.futures import ThreadPoolExecutor
import configparser
import csv
from dataclasses import asdict, dataclass, field
import datetime as _dt
import json
import logging
import math
import os

import numpy as np
from scipy import special as _sp

from . import __version__
from .estimators import (DEFAULT_BRACKET, ESTIMATORS, apply_estimator, asymptotic_variance,
                         skorokhod_correction)
from .exceptions import ConfigError, DomainError, ExperimentError
from .model import (SAMPLERS, SCHEMES, ModelParams, SimConfig, correction_limit, simulate_x,
                    stationary_variance)
from .numerics import RngStream

log = logging.getLogger(__name__)

MAX_FAIL_FRACTION = 0.10
KS_MIN_SIZE = 20
KS_CRITICAL_1PCT = 1.63


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    horizons: tuple
    step: float = 0.025
    replicates: int = 1
    estimators: tuple = ESTIMATORS
    seed: int = 0
    sampler: str = "exact"
    scheme: str = "trapezoid"
    bracket: tuple = DEFAULT_BRACKET

    def __post_init__(self):
        if not isinstance(self.params, ModelParams):
            raise DomainError("params must be a ModelParams")
        hs = tuple(float(h) for h in self.horizons)
        if not hs:
            raise DomainError("horizons must be non-empty")
        if len(set(hs)) != len(hs):
            raise DomainError(f"horizons must be distinct, got {hs}")
        object.__setattr__(self, "horizons", hs)
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise DomainError(f"replicates must be a positive integer, got {self.replicates!r}")
        object.__setattr__(self, "replicates", int(self.replicates))
        est = tuple(self.estimators)
        bad = [e for e in est if e not in ESTIMATORS]
        if not est or bad:
            raise DomainError(f"estimators must be a non-empty subset of {ESTIMATORS}, got {est}")
        object.__setattr__(self, "estimators", est)
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2 ** 64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "bracket", tuple(float(b) for b in self.bracket))
        for h in hs:  # validates step, grid compatibility and the cap
            SimConfig(h, self.step, self.scheme, self.sampler)

    def sim_config(self, horizon):
        return SimConfig(horizon, self.step, self.scheme, self.sampler)

    def to_dict(self):
        d = asdict(self)
        d["params"] = {"theta": self.params.theta, "hurst": self.params.hurst}
        d["horizons"] = list(self.horizons)
        d["estimators"] = list(self.estimators)
        d["bracket"] = list(self.bracket)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        p = d.pop("params")
        return cls(ModelParams(p["theta"], p["hurst"]), **d)


@dataclass(frozen=True)
class Record:
    replicate: int
    horizon: float
    estimator: str
    theta_hat: float


@dataclass(frozen=True)
class Aggregate:
    """Per (T, estimator) summary; ``sd`` is NaN (and ``sd_defined`` False) for n = 1."""

    horizon: float
    estimator: str
    n: int
    mean: float
    sd: float
    median: float
    ks: float
    n_fail: int

    @property
    def variance(self):
        return self.sd * self.sd

    @property
    def sd_defined(self):
        return self.n > 1


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list
    aggregates: list
    references: dict
    failures: list = field(default_factory=list)

    def values(self, horizon, estimator):
        """Finite θ̂ for one (T, estimator) group, in replicate order."""
        return np.array([r.theta_hat for r in self.records
                         if r.horizon == horizon and r.estimator == estimator
                         and math.isfinite(r.theta_hat)])

    def aggregate(self, horizon, estimator):
        for a in self.aggregates:
            if a.horizon == horizon and a.estimator == estimator:
                return a
        raise KeyError((horizon, estimator))

    def rmse(self, horizon, estimator):
        v = self.values(horizon, estimator)
        return float(np.sqrt(np.mean((v - self.config.params.theta) ** 2)))


def ks_statistic(sample):
    """sup_x |F_n(x) − Φ(x)| for an already standardized sample (n ≥ 20)."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < KS_MIN_SIZE:
        raise DomainError(f"KS statistic needs at least {KS_MIN_SIZE} values, got {n}")
    if not np.all(np.isfinite(x)):
        raise DomainError("KS sample must be finite")
    cdf = _sp.ndtr(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def ks_critical(n):
    """Asymptotic 1% critical value 1.63/√n."""
    return KS_CRITICAL_1PCT / math.sqrt(n)


def summarize(records, theta=None, sigma2=None):
    """Aggregates per (T, estimator), in sorted group order.

    The KS column uses √T(θ̂ − θ)/σ (needs ``theta`` and ``sigma2`` and at least
    20 finite values; NaN otherwise).  Groups without a finite value are
    omitted with a logged notice.
    """
    records = list(records)
    if not records:
        raise DomainError("summarize needs at least one record")
    groups = {}
    for r in records:
        groups.setdefault((r.horizon, r.estimator), []).append(r)
    out = []
    for (T, est) in sorted(groups):
        rows = sorted(groups[(T, est)], key=lambda r: r.replicate)
        v = np.array([r.theta_hat for r in rows], dtype=float)
        ok = v[np.isfinite(v)]
        n_fail = int(v.size - ok.size)
        if ok.size == 0:
            log.warning("group T=%s estimator=%s has no finite estimate; omitted", T, est)
            continue
        sd = float(np.std(ok, ddof=1)) if ok.size > 1 else float("nan")
        ks = float("nan")
        if theta is not None and sigma2 is not None and ok.size >= KS_MIN_SIZE:
            ks = ks_statistic(math.sqrt(T) * (ok - theta) / math.sqrt(sigma2))
        out.append(Aggregate(T, est, int(ok.size), float(np.mean(ok)), sd,
                             float(np.median(ok)), ks, n_fail))
    return out


def reference_values(params, need_sigma=True):
    refs = {"stationary_variance": stationary_variance(params),
            "correction_limit": correction_limit(params)}
    if need_sigma:
        refs["sigma_squared"] = asymptotic_variance(params).sigma_squared
    return refs


def _run_task(cfg, r, hi, corrections, simulate):
    T = cfg.horizons[hi]
    out, fails = [], []
    try:
        path = simulate(cfg.params, cfg.sim_config(T), RngStream(cfg.seed, r), block=hi)
    except Exception as exc:  # recorded, judged in aggregate
        fails.append((r, T, "*", f"{type(exc).__name__}: {exc}"))
        return [Record(r, T, e, float("nan")) for e in cfg.estimators], fails
    for e in cfg.estimators:
        try:
            res = apply_estimator(e, path, cfg.params, cfg.params.hurst, corrections.get(T),
                                  cfg.bracket)
            out.append(Record(r, T, e, float(res.theta_hat)))
        except Exception as exc:
            fails.append((r, T, e, f"{type(exc).__name__}: {exc}"))
            out.append(Record(r, T, e, float("nan")))
    return out, fails


def run_experiment(cfg, workers=1, simulate=simulate_x):
    """Run every (replicate, horizon) task and aggregate.

    Records come back in canonical (replicate, T, estimator) order whatever the
    worker count.  Failures are kept as NaN records; if more than 10% of the
    records fail an :class:`ExperimentError` carrying the report is raised.
    ``simulate`` defaults to :func:`fou2.model.simulate_x` and may be replaced
    (same signature) to inject faults.
    """
    if not int(workers) >= 1:
        raise DomainError(f"workers must be a positive integer, got {workers!r}")
    corrections = {}
    if "lse-corrected" in cfg.estimators:
        corrections = {T: skorokhod_correction(T, cfg.params) for T in cfg.horizons}
    # horizon-major, so each exact-sampler factor is built once
    tasks = [(r, hi) for hi in range(len(cfg.horizons)) for r in range(cfg.replicates)]

    def run(task):
        return _run_task(cfg, task[0], task[1], corrections, simulate)

    if workers == 1:
        results = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(run, tasks))
    records, failures = [], []
    for recs, fails in results:
        records.extend(recs)
        failures.extend(fails)
    records.sort(key=lambda x: (x.replicate, x.horizon, x.estimator))
    failures.sort(key=lambda x: (x[0], x[1], x[2]))
    refs = reference_values(cfg.params)
    n_bad = sum(1 for x in records if not math.isfinite(x.theta_hat))
    aggregates = summarize(records, cfg.params.theta, refs["sigma_squared"]) if n_bad < len(records) else []
    report = ExperimentReport(cfg, records, aggregates, refs, failures)
    if n_bad > MAX_FAIL_FRACTION * len(records):
        raise ExperimentError(f"{n_bad} of {len(records)} records failed "
                              f"(limit {MAX_FAIL_FRACTION:.0%})", report)
    return report


# ----------------------------------------------------------------------------
# configuration files

_SCHEMA = {
    "model": {"theta": (float, True), "hurst": (float, True)},
    "simulation": {"horizons": ("floats", True), "step": (float, False),
                   "sampler": (str, False), "scheme": (str, False)},
    "experiment": {"replicates": (int, True), "estimators": ("strs", True),
                   "seed": (int, True), "bracket": ("floats", False)},
}


def _convert(kind, raw):
    if kind == "floats":
        vals = [float(x) for x in raw.replace(",", " ").split()]
        if not vals:
            raise ValueError("empty list")
        return vals
    if kind == "strs":
        vals = [x for x in raw.replace(",", " ").split()]
        if not vals:
            raise ValueError("empty list")
        return vals
    if kind is int:
        return int(raw, 0)
    return kind(raw)


def parse_config(text):
    """Parse INI text into :class:`ExperimentConfig`.

    Sections ``[model]`` (theta, hurst), ``[simulation]`` (horizons, step,
    sampler, scheme) and ``[experiment]`` (replicates, estimators, seed,
    bracket).  Lists are comma or space separated.  Every offending key is
    collected into one :class:`ConfigError`.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config is not valid INI", [str(exc).splitlines()[0]]) from exc
    bad, values = [], {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            bad.append(f"[{sec}] (unknown section)")
            continue
        for key in cp[sec]:
            if key not in _SCHEMA[sec]:
                bad.append(f"{sec}.{key} (unknown key)")
    for sec, keys in _SCHEMA.items():
        for key, (kind, required) in keys.items():
            if not cp.has_option(sec, key):
                if required:
                    bad.append(f"{sec}.{key} (missing)")
                continue
            try:
                values[key] = _convert(kind, cp.get(sec, key))
            except ValueError:
                bad.append(f"{sec}.{key} (bad value {cp.get(sec, key)!r})")
    if bad:
        raise ConfigError("config schema violation", bad)
    if not values["theta"] > 1:
        bad.append("model.theta (must exceed 1)")
    if not 0.5 < values["hurst"] < 1:
        bad.append("model.hurst (must lie in (0.5, 1))")
    if values.get("sampler", "exact") not in SAMPLERS:
        bad.append(f"simulation.sampler (one of {', '.join(SAMPLERS)})")
    if values.get("scheme", "trapezoid") not in SCHEMES:
        bad.append(f"simulation.scheme (one of {', '.join(SCHEMES)})")
    if any(e not in ESTIMATORS for e in values["estimators"]):
        bad.append(f"experiment.estimators (subset of {', '.join(ESTIMATORS)})")
    if values["replicates"] < 1:
        bad.append("experiment.replicates (must be positive)")
    if not 0 <= values["seed"] < 2 ** 64:
        bad.append("experiment.seed (64-bit unsigned)")
    if bad:
        raise ConfigError("config schema violation", bad)
    kw = {k: values[k] for k in ("step", "sampler", "scheme", "bracket") if k in values}
    try:
        return ExperimentConfig(ModelParams(values["theta"], values["hurst"]), values["horizons"],
                                replicates=values["replicates"], estimators=values["estimators"],
                                seed=values["seed"], **kw)
    except DomainError as exc:
        raise ConfigError("config is inconsistent", [f"simulation ({exc})"]) from exc


def load_config(path):
    """Read an INI config, or the ``config`` block of a run manifest (``.json``)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        try:
            return ExperimentConfig.from_dict(json.loads(text)["config"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("manifest has no usable config block", [str(exc)]) from exc
    return parse_config(text)


def config_to_ini(cfg):
    fmt = "{:.17g}".format
    return (f"[model]\ntheta = {fmt(cfg.params.theta)}\nhurst = {fmt(cfg.params.hurst)}\n\n"
            f"[simulation]\nhorizons = {', '.join(fmt(h) for h in cfg.horizons)}\n"
            f"step = {fmt(cfg.step)}\nsampler = {cfg.sampler}\nscheme = {cfg.scheme}\n\n"
            f"[experiment]\nreplicates = {cfg.replicates}\n"
            f"estimators = {', '.join(cfg.estimators)}\nseed = {cfg.seed}\n"
            f"bracket = {', '.join(fmt(b) for b in cfg.bracket)}\n")


# ----------------------------------------------------------------------------
# report files

RECORDS_FILE = "records.csv"
AGGREGATES_FILE = "aggregates.csv"
MANIFEST_FILE = "manifest.json"


def _g(x):
    return f"{x:.17g}"


def write_report(report, out_dir, workers=None):
    """Write records, aggregates and manifest; returns the three paths."""
    os.makedirs(out_dir, exist_ok=True)
    rec_path = os.path.join(out_dir, RECORDS_FILE)
    agg_path = os.path.join(out_dir, AGGREGATES_FILE)
    man_path = os.path.join(out_dir, MANIFEST_FILE)
    with open(rec_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "T", "estimator", "theta_hat"])
        for r in report.records:
            w.writerow([r.replicate, _g(r.horizon), r.estimator, _g(r.theta_hat)])
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "estimator", "mean", "sd", "median", "ks", "n_fail"])
        for a in report.aggregates:
            w.writerow([_g(a.horizon), a.estimator, _g(a.mean), _g(a.sd), _g(a.median),
                        _g(a.ks), a.n_fail])
    manifest = {
        "config": report.config.to_dict(),
        "version": __version__,
        "references": report.references,
        "n_records": len(report.records),
        "failures": [list(f) for f in report.failures],
        "run": {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "workers": workers},
    }
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rec_path, agg_path, man_path


def read_records(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [Record(int(r["replicate"]), float(r["T"]), r["estimator"], float(r["theta_hat"]))
            for r in rows]
