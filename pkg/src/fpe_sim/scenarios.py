"""Scenario files, built-in scenarios and the engine runner behind the CLI.

Config grammar (one setting per line, ``#`` or ``;`` starts a comment)::

    name        = my-run
    description = free text shown by `fpe-sim list`
    family      = gamma | beta
    times       = 0.5, 0.8, 1.1, 1.4        # strictly increasing, > 0
    engines     = analytic, fd, mc
    t_start     = 0.5                       # fd/mc start time, default times[0]
    out_dir     = out
    params.mu1 = -3   params.mu2   params.mu3   params.alpha     (gamma)
    params.z1  = 1    params.z2    params.a1    params.a2   params.alpha (beta)
    analytic.n_points = 4001
    fd.n_cells = 512          fd.frame = physical_fixed | similarity_mapped
    fd.scheme = crank_nicolson  fd.cfl_safety = 0.4  fd.cluster_scale = 1.0
    fd.levels = 64, 128, 256, 512     # adds a convergence study
    mc.n_paths = 100000  mc.dt = 1e-3  mc.seed = 42  mc.bins = 64
    mc.boundary_policy = reflect | clamp_reflect     mc.workers = 1
    tol.mass = 1e-6   tol.l1_fd = 1e-3   tol.l1_mc = 0.05   tol.order = 1.8

Numbers may be written as fractions (``1/3``).  Keys are case-sensitive and
unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import csv
import json
import os
import textwrap
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigError, FpeError
from .field import DensityField, FLOAT_FMT, write_fields_csv
from .fpe_fd import FdConfig, convergence_study, evolve, family_spec, fitted_order, l1_error
from .sde_mc import McConfig, l1_distance, simulate_many
from .solutions import BetaFamilyParams, GammaFamilyParams, analytic_field

__all__ = [
    "Scenario",
    "ScenarioResult",
    "BUILTIN_SOURCES",
    "builtin_scenarios",
    "parse_scenario",
    "load_scenario_file",
    "user_config_dir",
    "discover_user_scenarios",
    "run_scenario",
    "csv_name",
]

ENGINES = ("analytic", "fd", "mc")
FAMILIES = {"gamma": (GammaFamilyParams, ("mu1", "mu2", "mu3", "alpha")),
            "beta": (BetaFamilyParams, ("z1", "z2", "a1", "a2", "alpha"))}
DEFAULT_TOL = {"mass": 1e-6, "l1_fd": 1e-3, "l1_mc": 0.05, "order": 1.8}
_SECTION = "scenario"

BUILTIN_SOURCES = {
    "fig1": """
        description = gamma family peak growth, alpha=-2 mu1=-3 mu2=mu3=1/2
        family = gamma
        times = 0.5, 0.8, 1.1, 1.4
        engines = analytic
        params.mu1 = -3
        params.mu2 = 1/2
        params.mu3 = 1/2
        params.alpha = -2
    """,
    "fig2": """
        description = beta family with walls z_k t^alpha, alpha=-2 z=(1,4) a=(1/3,1/2)
        family = beta
        times = 1.0, 1.2, 1.4
        engines = analytic
        params.z1 = 1
        params.z2 = 4
        params.a1 = 1/3
        params.a2 = 1/2
        params.alpha = -2
    """,
    "verify-gamma": """
        description = gamma family, analytic vs finite differences vs Monte Carlo
        family = gamma
        times = 0.5, 0.8, 1.1, 1.4
        engines = analytic, fd, mc
        params.mu1 = -3
        params.mu2 = 1/2
        params.mu3 = 1/2
        params.alpha = -2
        fd.n_cells = 512
        fd.cluster_scale = 1.0
        mc.n_paths = 100000
        mc.dt = 1e-3
        mc.seed = 42
        mc.bins = 64
    """,
    "verify-beta": """
        description = beta family, analytic vs finite differences vs Monte Carlo
        family = beta
        times = 1.0, 1.2, 1.4
        engines = analytic, fd, mc
        params.z1 = 1
        params.z2 = 4
        params.a1 = 1/3
        params.a2 = 1/2
        params.alpha = -2
        fd.n_cells = 512
        fd.frame = similarity_mapped
        mc.n_paths = 100000
        mc.dt = 1e-3
        mc.seed = 42
        mc.bins = 64
    """,
    "convergence": """
        description = finite-difference convergence order on the gamma family
        family = gamma
        times = 0.5, 1.4
        engines = fd
        params.mu1 = -3
        params.mu2 = 1/2
        params.mu3 = 1/2
        params.alpha = -2
        fd.n_cells = 512
        fd.cluster_scale = 1.0
        fd.levels = 64, 128, 256, 512
    """,
}


@dataclass(frozen=True)
class Scenario:
    name: str
    family: str
    params: Union[GammaFamilyParams, BetaFamilyParams]
    times: tuple
    engines: tuple
    fd: Optional[FdConfig] = None
    mc: Optional[McConfig] = None
    out_dir: str = "out"
    description: str = ""
    n_points: int = 4001
    levels: tuple = ()
    tol: dict = field(default_factory=lambda: dict(DEFAULT_TOL))

    @property
    def t_start(self) -> float:
        if self.fd is not None:
            return self.fd.t_start
        if self.mc is not None:
            return self.mc.t_start
        return self.times[0]

    def with_overrides(self, out_dir=None, seed=None, cells=None, paths=None) -> "Scenario":
        s = self
        if out_dir is not None:
            s = replace(s, out_dir=str(out_dir))
        if cells is not None and s.fd is not None:
            s = replace(s, fd=_rebuild(FdConfig, s.fd, n_cells=int(cells)))
        if s.mc is not None and (seed is not None or paths is not None):
            kw = {}
            if seed is not None:
                kw["seed"] = int(seed)
            if paths is not None:
                kw["n_paths"] = int(paths)
            s = replace(s, mc=_rebuild(McConfig, s.mc, **kw))
        return s


def _rebuild(cls, obj, **kw):
    try:
        return replace(obj, **kw)
    except FpeError as exc:
        raise ConfigError(str(exc)) from exc


def _number(key: str, text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: not a number: {text!r}") from None


def _integer(key: str, text: str) -> int:
    v = _number(key, text)
    if v != int(v):
        raise ConfigError(f"{key}: not an integer: {text!r}")
    return int(v)


def _list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _read_pairs(text: str, source: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   delimiters=("=",), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {' '.join(str(exc).split())}") from exc
    if cp.sections() != [_SECTION]:
        raise ConfigError(f"{source}: section headers are not allowed")
    return dict(cp[_SECTION])


_FD_KEYS = {"n_cells", "frame", "scheme", "cfl_safety", "cluster_scale", "levels"}
_MC_KEYS = {"n_paths", "dt", "seed", "bins", "boundary_policy", "workers"}
_TOP_KEYS = {"name", "description", "family", "times", "engines", "t_start", "out_dir"}


def parse_scenario(text: str, name: Optional[str] = None, source: str = "<config>") -> Scenario:
    """Build a Scenario from key = value text; raises ConfigError on any problem."""
    kv = _read_pairs(text, source)
    for key in kv:
        head, _, tail = key.partition(".")
        ok = (key in _TOP_KEYS or (head == "params" and tail) or (head == "fd" and tail in _FD_KEYS)
              or (head == "mc" and tail in _MC_KEYS) or (head == "tol" and tail in DEFAULT_TOL)
              or key == "analytic.n_points")
        if not ok:
            raise ConfigError(f"{source}: unknown key {key!r}")
    name = kv.get("name", name)
    if not name:
        raise ConfigError(f"{source}: missing 'name'")
    family = kv.get("family", "")
    if family not in FAMILIES:
        raise ConfigError(f"{source}: family must be gamma or beta, got {family!r}")
    cls, fields_ = FAMILIES[family]
    pkeys = {k[7:] for k in kv if k.startswith("params.")}
    if pkeys != set(fields_):
        raise ConfigError(f"{source}: {family} needs params.{{{', '.join(fields_)}}}")
    params = cls(**{f: _number(f"params.{f}", kv[f"params.{f}"]) for f in fields_})
    try:
        params.validate()
    except FpeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    if "times" not in kv:
        raise ConfigError(f"{source}: missing 'times'")
    times = tuple(_number("times", v) for v in _list(kv["times"]))
    if not times or times[0] <= 0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError(f"{source}: times must be nonempty, positive and strictly increasing")
    engines = tuple(_list(kv.get("engines", "analytic")))
    if not engines or any(e not in ENGINES for e in engines) or len(set(engines)) != len(engines):
        raise ConfigError(f"{source}: engines must be a nonempty subset of {', '.join(ENGINES)}")
    t_start = _number("t_start", kv["t_start"]) if "t_start" in kv else times[0]
    if t_start > times[0]:
        raise ConfigError(f"{source}: t_start is after the first output time")

    fd = mc = None
    levels: tuple = ()
    try:
        if "fd" in engines:
            fd = FdConfig(
                n_cells=_integer("fd.n_cells", kv.get("fd.n_cells", "512")),
                t_start=t_start,
                t_end=times[-1],
                cfl_safety=_number("fd.cfl_safety", kv.get("fd.cfl_safety", "0.4")),
                scheme=kv.get("fd.scheme", "crank_nicolson"),
                frame=kv.get("fd.frame", "physical_fixed"),
                cluster_scale=(_number("fd.cluster_scale", kv["fd.cluster_scale"])
                               if "fd.cluster_scale" in kv else None),
                snapshot_times=times,
            )
            levels = tuple(_integer("fd.levels", v) for v in _list(kv.get("fd.levels", "")))
        if "mc" in engines:
            mc = McConfig(
                n_paths=_integer("mc.n_paths", kv.get("mc.n_paths", "100000")),
                dt=_number("mc.dt", kv.get("mc.dt", "1e-3")),
                seed=_integer("mc.seed", kv.get("mc.seed", "0")),
                t_start=t_start,
                boundary_policy=kv.get("mc.boundary_policy", "reflect"),
                bins=_integer("mc.bins", kv.get("mc.bins", "64")),
                workers=_integer("mc.workers", kv.get("mc.workers", "1")),
            )
            if not mc.dt < times[-1] - t_start:
                raise ConfigError("mc.dt must be smaller than the simulated time span")
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if family == "beta" and fd is not None and fd.frame != "similarity_mapped":
        raise ConfigError(f"{source}: moving walls need fd.frame = similarity_mapped")
    tol = dict(DEFAULT_TOL)
    for k in DEFAULT_TOL:
        if f"tol.{k}" in kv:
            tol[k] = _number(f"tol.{k}", kv[f"tol.{k}"])
    return Scenario(
        name=name, family=family, params=params, times=times, engines=engines, fd=fd, mc=mc,
        out_dir=kv.get("out_dir", "out"), description=kv.get("description", ""),
        n_points=_integer("analytic.n_points", kv.get("analytic.n_points", "4001")),
        levels=levels, tol=tol,
    )


def builtin_scenarios() -> dict[str, Scenario]:
    return {n: parse_scenario(textwrap.dedent(src), name=n, source=f"builtin:{n}")
            for n, src in BUILTIN_SOURCES.items()}


def load_scenario_file(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_scenario(text, name=path.stem, source=str(path))


def user_config_dir() -> Path:
    env = os.environ.get("FPE_SIM_CONFIG_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CONFIG_HOME") or os.path.join(os.path.expanduser("~"), ".config")
    return Path(base) / "fpe-sim"


def discover_user_scenarios(directory: Optional[Path] = None):
    """(scenarios by name, [(path, reason)] for files that failed to parse)."""
    directory = user_config_dir() if directory is None else Path(directory)
    good, bad = {}, []
    if not directory.is_dir():
        return good, bad
    for path in sorted(directory.glob("*.cfg")):
        try:
            sc = load_scenario_file(path)
        except ConfigError as exc:
            bad.append((path, str(exc)))
            continue
        good[sc.name] = sc
    return good, bad


def csv_name(name: str, engine: str, t: float) -> str:
    return f"{name}_{engine}_t{t:g}.csv"


@dataclass
class ScenarioResult:
    scenario: Scenario
    files: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    convergence: list = field(default_factory=list)
    order: Optional[float] = None

    @property
    def passed(self) -> bool:
        return not self.failures


def _gnuplot(sc: Scenario, out: Path, fields_by_engine: dict) -> Path:
    path = out / f"{sc.name}.gp"
    style = {"analytic": "lines lw 2", "fd": "lines dt 2", "mc": "steps"}
    lines = [
        f"# plot script for scenario {sc.name}; run `gnuplot {path.name}` in this directory",
        "set datafile separator ','",
        "set key outside right",
        "set xlabel 'x'",
        "set ylabel 'W(x,t)'",
        "set terminal pngcairo size 900,600",
        f"set output '{sc.name}.png'",
    ]
    plots = []
    for engine, flds in fields_by_engine.items():
        for f in flds:
            plots.append(f"'{csv_name(sc.name, engine, f.t)}' every ::1 using 2:3 "
                         f"with {style[engine]} title '{engine} t={f.t:g}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n")
    return path


def _fmt(v) -> str:
    return "" if v is None else FLOAT_FMT.format(float(v))


def run_scenario(sc: Scenario) -> ScenarioResult:
    """Run every engine, write CSVs, summary and plot script into sc.out_dir.

    Engine failures propagate as FpeError; tolerance failures are collected
    in the result.
    """
    out = Path(sc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = ScenarioResult(sc)
    p = sc.params
    flds: dict[str, list[DensityField]] = {}

    if "analytic" in sc.engines:
        flds["analytic"] = [analytic_field(p, t, n_points=sc.n_points) for t in sc.times]
    if "fd" in sc.engines:
        spec = family_spec(p, sc.fd.t_start, sc.fd.t_end, frame=sc.fd.frame)
        run = evolve(spec, sc.fd)
        flds["fd"] = list(run.snapshots)
        if sc.levels:
            res.convergence = convergence_study(spec, sc.fd, sc.levels)
            res.order = fitted_order(res.convergence)
    if "mc" in sc.engines:
        spec = family_spec(p, sc.mc.t_start, sc.times[-1], truncate=False)
        flds["mc"] = simulate_many(spec, sc.mc, sc.times)

    for engine, fl in flds.items():
        for f in fl:
            path = out / csv_name(sc.name, engine, f.t)
            write_fields_csv(path, [f])
            res.files.append(path)
            if engine == "mc":
                hpath = out / f"{sc.name}_mc_hist_t{f.t:g}.csv"
                f.histogram_to_csv(hpath)
                res.files.append(hpath)

    summary = out / f"{sc.name}_summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "engine", "mass", "peak_x", "peak_w", "l1_analytic", "l1_fd", "l1_mc"])
        for i, t in enumerate(sc.times):
            at = {e: fl[i] for e, fl in flds.items()}
            l1 = {}
            if "fd" in at:
                l1[("analytic", "fd")] = l1_error(at["fd"], p.density)
            if "mc" in at:
                l1[("analytic", "mc")] = l1_distance(at["mc"], p.density, check_support=False)
                if "fd" in at:
                    l1[("fd", "mc")] = l1_distance(at["mc"], at["fd"], check_support=False)

            def pair(a, b):
                return l1.get((a, b), l1.get((b, a))) if a != b else None

            for engine, f in at.items():
                px, pw = f.peak()
                row = {"t": t, "engine": engine, "mass": f.mass(), "peak_x": px, "peak_w": pw,
                       "l1_analytic": pair(engine, "analytic"),
                       "l1_fd": pair(engine, "fd"), "l1_mc": pair(engine, "mc")}
                res.rows.append(row)
                w.writerow([_fmt(t), engine, _fmt(row["mass"]), _fmt(px), _fmt(pw),
                            _fmt(row["l1_analytic"]), _fmt(row["l1_fd"]), _fmt(row["l1_mc"])])
                if engine == "analytic" and abs(row["mass"] - 1.0) > sc.tol["mass"]:
                    res.failures.append({"check": "mass", "engine": engine, "t": t,
                                         "value": row["mass"], "limit": sc.tol["mass"]})
            if ("analytic", "fd") in l1 and l1[("analytic", "fd")] > sc.tol["l1_fd"]:
                res.failures.append({"check": "l1_fd", "t": t, "value": l1[("analytic", "fd")],
                                     "limit": sc.tol["l1_fd"]})
            if ("analytic", "mc") in l1 and l1[("analytic", "mc")] > sc.tol["l1_mc"]:
                res.failures.append({"check": "l1_mc", "t": t, "value": l1[("analytic", "mc")],
                                     "limit": sc.tol["l1_mc"]})
    res.files.append(summary)

    if res.convergence:
        conv = out / f"{sc.name}_convergence.csv"
        with open(conv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n_cells", "l1_error"])
            for n, e in res.convergence:
                w.writerow([n, _fmt(e)])
        res.files.append(conv)
        if res.order < sc.tol["order"]:
            res.failures.append({"check": "order", "value": res.order, "limit": sc.tol["order"]})
    res.files.append(_gnuplot(sc, out, flds))
    return res


def failure_line(name: str, failure: dict) -> str:
    return json.dumps({"status": "tolerance", "scenario": name, **failure}, sort_keys=True)
