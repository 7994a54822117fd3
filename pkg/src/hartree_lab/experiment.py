"""Config-driven coupled N-body / Hartree runs and the bound checks on them."""
from __future__ import annotations

import copy
import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from scipy import integrate, stats

from . import counting, fock, validation
from .errors import ConfigError, HartreeLabError, InvalidArgumentError
from .lattice import GridSpec, LatticeField, build_grid, sample_interaction
from .meanfield import HartreeParams, Orbital, TrapProtocol, hartree_step

INTERACTION_PROFILES = ("box", "gaussian", "cosine-bump")
ORBITAL_PROFILES = ("gaussian", "plane-wave", "flat")
INITIAL_STATES = ("product", "one-defect", "custom")

TIMESERIES_COLUMNS = (
    "time", "alpha", "gamma", "gronwall_bound", "op_distance", "trace_distance",
    "nbody_norm_drift", "hartree_norm_drift", "energy",
)
CONSERVATION_TOL = 1e-8
HARTREE_NORM_TOL = 1e-9


# --- config ---------------------------------------------------------------------


@dataclass
class GridConfig:
    length: float = 2 * math.pi
    points: int = 8


@dataclass
class InteractionConfig:
    profile: str = "box"
    amplitude: float = 1.0
    width: float = 1.0
    beta: float = 0.0


@dataclass
class TrapConfig:
    kind: str = "constant"
    amplitude: float = 0.0
    ramp_time: float = 1.0
    center: Optional[float] = None


@dataclass
class OrbitalConfig:
    profile: str = "gaussian"
    center: Optional[float] = None
    width: float = 1.0
    momentum: float = 0.0
    mode: int = 1


@dataclass
class InitialConfig:
    state: str = "product"
    orbital: OrbitalConfig = field(default_factory=OrbitalConfig)
    defect: OrbitalConfig = field(default_factory=lambda: OrbitalConfig(profile="plane-wave", mode=1))
    file: Optional[str] = None


@dataclass
class TimeConfig:
    dt: float = 0.01
    t_final: float = 1.0
    scheme: str = "splitting"


@dataclass
class ChecksConfig:
    theorem1: bool = True
    lemma2: bool = True
    lemma1: bool = True
    conservation: bool = True
    derivative: bool = False
    random_states: int = 0


@dataclass
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    particles: object = 3
    interaction: InteractionConfig = field(default_factory=InteractionConfig)
    trap: TrapConfig = field(default_factory=TrapConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    weights: list = field(default_factory=lambda: [{"family": "linear"}])
    r_values: list = field(default_factory=lambda: [1.0, 1.5, 2.0, 4.0])
    time: TimeConfig = field(default_factory=TimeConfig)
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    output: str = "runs/default"
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        if "grid" not in raw:
            raise ConfigError("config is missing the required 'grid' section")
        known = {"grid", "particles", "interaction", "trap", "initial", "weights", "r_values",
                 "time", "checks", "output", "seed"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            initial = dict(raw.get("initial") or {})
            for key in ("orbital", "defect"):
                if key in initial:
                    initial[key] = OrbitalConfig(**initial[key])
            cfg = cls(
                grid=GridConfig(**raw["grid"]),
                particles=raw.get("particles", 3),
                interaction=InteractionConfig(**(raw.get("interaction") or {})),
                trap=TrapConfig(**(raw.get("trap") or {})),
                initial=InitialConfig(**initial),
                weights=list(raw.get("weights", [{"family": "linear"}])),
                r_values=[float(r) for r in raw.get("r_values", [1.0, 1.5, 2.0, 4.0])],
                time=TimeConfig(**(raw.get("time") or {})),
                checks=ChecksConfig(**(raw.get("checks") or {})),
                output=str(raw.get("output", "runs/default")),
                seed=int(raw.get("seed", 0)),
            )
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = cls.from_yaml(text)
        if cfg.initial.file and not Path(cfg.initial.file).is_absolute():
            cfg.initial.file = str((path.parent / cfg.initial.file).resolve())
        return cfg

    def particle_list(self) -> list:
        ps = self.particles if isinstance(self.particles, list) else [self.particles]
        return [int(n) for n in ps]

    def for_particles(self, N: int) -> "ExperimentConfig":
        cfg = copy.deepcopy(self)
        cfg.particles = int(N)
        return cfg

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.grid.length > 0 and int(self.grid.points) >= 2, "grid needs length > 0 and points >= 2")
        ns = self.particles if isinstance(self.particles, list) else [self.particles]
        need(len(ns) > 0, "particle list is empty")
        need(all(int(n) >= 1 for n in ns), "particle numbers must be >= 1")
        need(self.interaction.profile in INTERACTION_PROFILES,
             f"interaction.profile must be one of {INTERACTION_PROFILES}")
        need(self.interaction.width > 0, "interaction.width must be positive")
        need(self.trap.kind in ("constant", "linear-ramp-off", "quench"), f"unknown trap kind {self.trap.kind!r}")
        need(self.initial.state in INITIAL_STATES, f"initial.state must be one of {INITIAL_STATES}")
        need(self.initial.state != "custom" or bool(self.initial.file), "custom initial state needs initial.file")
        for o in (self.initial.orbital, self.initial.defect):
            need(o.profile in ORBITAL_PROFILES, f"orbital profile must be one of {ORBITAL_PROFILES}")
        need(self.time.dt > 0 and self.time.t_final >= 0, "time.dt must be > 0 and t_final >= 0")
        need(len(self.r_values) > 0 and all(r >= 1 for r in self.r_values), "r_values must be >= 1")
        try:
            HartreeParams(self.time.dt, self.time.t_final, self.time.scheme)
            for w in self.weights:
                counting.WeightSpec.from_dict(w, max(int(n) for n in ns))
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from exc


# --- system construction ------------------------------------------------------------


def _periodic_offset(grid: GridSpec, center: float) -> np.ndarray:
    d = grid.positions() - center
    return d - grid.length * np.round(d / grid.length)


def interaction_profile(grid: GridSpec, cfg: InteractionConfig) -> LatticeField:
    x = np.abs(grid.displacements())
    a, w = cfg.amplitude, cfg.width
    if cfg.profile == "box":
        values = np.where(x <= w + 1e-12 * grid.length, a, 0.0)
    elif cfg.profile == "gaussian":
        values = a * np.exp(-(x**2) / (2 * w**2))
    else:
        values = np.where(x < w, a * 0.5 * (1 + np.cos(np.pi * x / w)), 0.0)
    return LatticeField(values.astype(float), grid)


def trap_protocol(grid: GridSpec, cfg: TrapConfig) -> TrapProtocol:
    center = grid.length / 2 if cfg.center is None else cfg.center
    profile = cfg.amplitude * (1 - np.cos(2 * np.pi * _periodic_offset(grid, center) / grid.length))
    return TrapProtocol(cfg.kind, LatticeField(profile, grid), cfg.ramp_time)


def orbital_profile(grid: GridSpec, cfg: OrbitalConfig) -> Orbital:
    x = grid.positions()
    if cfg.profile == "gaussian":
        center = grid.length / 2 if cfg.center is None else cfg.center
        d = _periodic_offset(grid, center)
        values = np.exp(-(d**2) / (2 * cfg.width**2)) * np.exp(1j * cfg.momentum * x)
    elif cfg.profile == "plane-wave":
        values = np.exp(2j * np.pi * cfg.mode * x / grid.length)
    else:
        values = np.ones(grid.points, dtype=complex)
    return Orbital.from_values(grid, values, normalize=True)


def load_orbital(grid: GridSpec, path) -> Orbital:
    path = Path(path)
    try:
        data = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read orbital file {path}: {exc}") from exc
    data = np.asarray(data)
    if data.ndim == 2 and data.shape[1] == 2:
        data = data[:, 0] + 1j * data[:, 1]
    data = np.ravel(data)
    if data.shape[0] != grid.points:
        raise ConfigError(f"orbital file has {data.shape[0]} values, grid has {grid.points} points")
    return Orbital.from_values(grid, data, normalize=True)


def orthogonal_partner(phi: Orbital, candidate: Orbital) -> Orbital:
    h = phi.grid.spacing
    overlap = h * np.vdot(phi.values, candidate.values)
    rest = candidate.values - overlap * phi.values
    if np.sqrt(h * np.sum(np.abs(rest) ** 2)) < 1e-8:
        raise ConfigError("defect orbital is parallel to the condensate orbital")
    return Orbital.from_values(phi.grid, rest, normalize=True)


@dataclass
class System:
    grid: GridSpec
    particles: int
    v_base: LatticeField
    v_scaled: LatticeField
    trap: TrapProtocol
    phi0: Orbital
    psi0: fock.ManyBodyState
    spec: fock.HamiltonianSpec


def build_system(cfg: ExperimentConfig) -> System:
    N = cfg.particle_list()[0]
    grid = build_grid(cfg.grid.length, cfg.grid.points)
    v_base = interaction_profile(grid, cfg.interaction)
    v_scaled = sample_interaction(v_base, N, cfg.interaction.beta)
    trap = trap_protocol(grid, cfg.trap)
    if cfg.initial.state == "custom" or cfg.initial.file:
        phi0 = load_orbital(grid, cfg.initial.file)
    else:
        phi0 = orbital_profile(grid, cfg.initial.orbital)
    spec = fock.HamiltonianSpec(grid, v_scaled, trap, N)
    basis = fock.enumerate_basis(grid.points, N)
    if cfg.initial.state == "one-defect":
        perp = orthogonal_partner(phi0, orbital_profile(grid, cfg.initial.defect))
        psi0 = fock.one_defect_state(phi0, perp, basis)
    else:
        psi0 = fock.product_state(phi0, basis)
    return System(grid, N, v_base, v_scaled, trap, phi0, psi0, spec)


# --- run ----------------------------------------------------------------------------


@dataclass
class RunReport:
    config: dict
    particles: int
    r_values: list
    times: np.ndarray
    alpha_series: np.ndarray
    gamma_series: np.ndarray
    c_t_series: dict
    gronwall_bound_series: dict
    op_distance_series: np.ndarray
    trace_distance_series: np.ndarray
    p1_defect_series: np.ndarray
    nbody_norm_drift_series: np.ndarray
    hartree_norm_drift_series: np.ndarray
    energy_series: np.ndarray
    weight_alpha_series: dict = field(default_factory=dict)
    bound_checks: list = field(default_factory=list)
    derivative: Optional[dict] = None
    warnings: list = field(default_factory=list)
    time_independent: bool = True

    @property
    def passed(self) -> bool:
        ok = all(c.passed for c in self.bound_checks)
        if self.derivative is not None:
            ok = ok and self.derivative["passed"]
        return ok

    def failed_checks(self) -> list:
        return [c for c in self.bound_checks if not c.passed]

    def columns(self) -> dict:
        cols = {
            "time": self.times,
            "alpha": self.alpha_series,
            "gamma": self.gamma_series,
        }
        for r in self.r_values:
            cols[f"c_t_r{r:g}"] = self.c_t_series[r]
        cols["gronwall_bound"] = self.gronwall_bound_series[self.r_values[0]]
        cols["op_distance"] = self.op_distance_series
        cols["trace_distance"] = self.trace_distance_series
        cols["nbody_norm_drift"] = self.nbody_norm_drift_series
        cols["hartree_norm_drift"] = self.hartree_norm_drift_series
        cols["energy"] = self.energy_series
        cols["p1_defect"] = self.p1_defect_series
        for r in self.r_values:
            cols[f"gronwall_bound_r{r:g}"] = self.gronwall_bound_series[r]
        for label, series in self.weight_alpha_series.items():
            cols[f"alpha_{label}"] = series
        return cols

    def summary(self) -> dict:
        families: dict = {}
        for c in self.bound_checks:
            fam = families.setdefault(c.name, {"count": 0, "violations": 0, "min_margin": math.inf,
                                               "tolerance": c.tolerance})
            fam["count"] += 1
            fam["violations"] += int(not c.passed)
            fam["min_margin"] = min(fam["min_margin"], c.margin)
        return {
            "passed": self.passed,
            "particles": self.particles,
            "r_values": self.r_values,
            "alpha0": float(self.alpha_series[0]),
            "max_alpha": float(np.max(self.alpha_series)),
            "time_independent": self.time_independent,
            "checks": families,
            "derivative": self.derivative,
            "warnings": self.warnings,
            "config": self.config,
        }


def _trajectory(system: System, dt: float, t_final: float, scheme: str):
    """Yield ``(t, psi, phi)`` along the coupled evolution, including ``t = 0``."""
    params = HartreeParams(dt, t_final, scheme)
    prop = fock.SchroedingerPropagator(system.spec)
    psi, phi = system.psi0, system.phi0
    v_mean = validation.unscaled_interaction(system.v_scaled, system.particles)
    for n in range(params.steps + 1):
        t = n * dt
        yield t, psi, phi, prop
        if n < params.steps:
            psi = prop.step(psi, t, dt)
            phi = hartree_step(phi, system.trap, v_mean, t, dt, scheme)


def alpha_gamma_series(system: System, dt: float, t_final: float, scheme: str = "splitting"):
    times, alphas, gammas = [], [], []
    lin = counting.WeightSpec.linear(system.particles)
    for t, psi, phi, _ in _trajectory(system, dt, t_final, scheme):
        ab = counting.adapted_basis(phi)
        times.append(t)
        alphas.append(counting.alpha(psi, ab, lin))
        gammas.append(validation.gamma(psi, ab, system.v_scaled, orbital=phi))
    return np.array(times), np.array(alphas), np.array(gammas)


def simulate(cfg: ExperimentConfig) -> RunReport:
    system = build_system(cfg)
    N = system.particles
    r_values = [float(r) for r in cfg.r_values]
    lin = counting.WeightSpec.linear(N)
    weights = [counting.WeightSpec.from_dict(w, N) for w in cfg.weights]
    v_unscaled = validation.unscaled_interaction(system.v_scaled, N)

    rows = {k: [] for k in ("t", "alpha", "gamma", "op", "tr", "p1", "nd", "hd", "e")}
    c_t = {r: [] for r in r_values}
    weight_alpha = {w.label: [] for w in weights if w.family != "linear"}
    checks = []
    warnings = []
    energy0 = None
    for t, psi, phi, prop in _trajectory(system, cfg.time.dt, cfg.time.t_final, cfg.time.scheme):
        ab = counting.adapted_basis(phi)
        spectrum = counting.counting_spectrum(psi, ab)
        a = float(np.dot(lin.table, spectrum.weights))
        g = validation.gamma(psi, ab, system.v_scaled, orbital=phi)
        cond = validation.condensation_equivalence_report(psi, ab, time=t)
        for w in weights:
            if w.family != "linear":
                weight_alpha[w.label].append(float(np.dot(w.table, spectrum.weights)))
        for r in r_values:
            cv = validation.c_phi(v_unscaled, phi, r)
            c_t[r].append(10.0 * cv)
            if cfg.checks.lemma2:
                checks.append(validation.BoundCheck(f"lemma2[r={r:g}]", t, abs(g),
                                                    validation.lemma2_rhs(cv, a, N), validation.LEMMA2_TOL))
        if cfg.checks.lemma1:
            checks.extend(cond.checks)
        energy = prop.energy(psi, t)
        energy0 = energy if energy0 is None else energy0
        rows["t"].append(t)
        rows["alpha"].append(a)
        rows["gamma"].append(g)
        rows["op"].append(cond.operator_distance)
        rows["tr"].append(cond.trace_distance)
        rows["p1"].append(1.0 - cond.p1_overlap)
        rows["nd"].append(abs(psi.norm() - 1.0))
        rows["hd"].append(abs(phi.norm() - 1.0))
        rows["e"].append(energy)

    times = np.array(rows["t"])
    alphas = np.array(rows["alpha"])
    c_t = {r: np.array(v) for r, v in c_t.items()}
    bounds = {r: validation.gronwall_bound(alphas[0], c_t[r], times, N) for r in r_values}
    if cfg.checks.theorem1:
        for r in r_values:
            checks.extend(validation.theorem1_checks(times, alphas, c_t[r], N, f"theorem1[r={r:g}]"))
    time_independent = system.trap.time_independent
    energy = np.array(rows["e"])
    if cfg.checks.conservation:
        for t, nd, hd in zip(times, rows["nd"], rows["hd"]):
            checks.append(validation.BoundCheck("nbody_norm", float(t), nd, 0.0, CONSERVATION_TOL))
            checks.append(validation.BoundCheck("hartree_norm", float(t), hd, 0.0, HARTREE_NORM_TOL))
        if time_independent:
            scale = max(1.0, abs(energy[0]))
            for t, e in zip(times, energy):
                checks.append(validation.BoundCheck("energy", float(t), abs(e - energy[0]) / scale, 0.0,
                                                    CONSERVATION_TOL))
    if cfg.time.scheme == "explicit-rk4" and np.max(rows["hd"]) > 1e-10:
        warnings.append(f"rk4 Hartree norm drift reached {np.max(rows['hd']):.2e}")
    for c in checks:
        if c.name.startswith("lemma2") and c.rhs > 0 and c.passed and c.margin < 0.01 * c.rhs:
            warnings.append(f"{c.name} within 1% of its bound at t={c.time:g}")
            break

    derivative = None
    if cfg.checks.derivative:
        coarse = (times, alphas, np.array(rows["gamma"]))
        fine = alpha_gamma_series(system, cfg.time.dt / 2, cfg.time.t_final, cfg.time.scheme)
        d = validation.alpha_derivative_check(coarse, fine)
        derivative = {"dt": d.dt, "residual_coarse": d.residual_coarse, "residual_fine": d.residual_fine,
                      "ratio": d.ratio, "passed": d.passed}

    if cfg.checks.random_states > 0:
        checks.extend(random_state_checks(system, cfg.checks.random_states, cfg.seed, r_values))

    return RunReport(
        config=cfg.to_dict(), particles=N, r_values=r_values, times=times, alpha_series=alphas,
        gamma_series=np.array(rows["gamma"]), c_t_series=c_t, gronwall_bound_series=bounds,
        op_distance_series=np.array(rows["op"]), trace_distance_series=np.array(rows["tr"]),
        p1_defect_series=np.array(rows["p1"]), nbody_norm_drift_series=np.array(rows["nd"]),
        hartree_norm_drift_series=np.array(rows["hd"]), energy_series=energy,
        weight_alpha_series={k: np.array(v) for k, v in weight_alpha.items()},
        bound_checks=checks, derivative=derivative, warnings=warnings, time_independent=time_independent,
    )


def random_state_checks(system: System, count: int, seed: int, r_values) -> list:
    """Lemma 2 and Lemma 1 checks on random states and orbitals at the run's N, M."""
    rng = np.random.default_rng(seed)
    basis = system.psi0.basis
    grid = system.grid
    out = []
    for _ in range(count):
        psi = fock.random_state(basis, rng)
        phi = Orbital.from_values(grid, rng.normal(size=grid.points) + 1j * rng.normal(size=grid.points),
                                  normalize=True)
        ab = counting.adapted_basis(phi)
        a = counting.alpha(psi, ab, counting.WeightSpec.linear(system.particles))
        g = validation.gamma(psi, ab, system.v_scaled, orbital=phi)
        for r in r_values:
            out.append(validation.lemma2_check(psi, phi, system.v_scaled, r, alpha_value=a, gamma_value=g))
        out.extend(validation.condensation_equivalence_report(psi, ab).checks)
    return [validation.BoundCheck("random:" + c.name, c.time, c.lhs, c.rhs, c.tolerance) for c in out]


# --- persistence ----------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def write_report(report: RunReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = report.columns()
    names = list(cols)
    with open(out / "timeseries.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(len(report.times)):
            writer.writerow([_fmt(cols[n][i]) for n in names])
    (out / "report.json").write_text(json.dumps(_jsonable(report.summary()), indent=2, sort_keys=True) + "\n")
    (out / "config.yaml").write_text(yaml.safe_dump(report.config, sort_keys=False))
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_error(out_dir, exc: BaseException) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = getattr(exc, "kind", type(exc).__name__)
    path = out / "error.json"
    path.write_text(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}, indent=2) + "\n")
    return path


def read_timeseries(report_dir) -> dict:
    path = Path(report_dir) / "timeseries.csv"
    if not path.exists():
        raise FileNotFoundError(f"no timeseries.csv in {report_dir}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader, None)
        if names is None:
            return {}
        rows = [list(map(float, row)) for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def read_summary(report_dir) -> dict:
    return json.loads((Path(report_dir) / "report.json").read_text())


def recheck(report_dir) -> list:
    """Re-run the bound checks from persisted series."""
    cols = read_timeseries(report_dir)
    summary = read_summary(report_dir)
    N = int(summary["particles"])
    r_values = [float(r) for r in summary["r_values"]]
    times, alphas, gammas = cols["time"], cols["alpha"], cols["gamma"]
    checks = []
    for r in r_values:
        ct = cols[f"c_t_r{r:g}"]
        checks.extend(validation.theorem1_checks(times, alphas, ct, N, f"theorem1[r={r:g}]"))
        for t, a, g, c in zip(times, alphas, gammas, ct):
            checks.append(validation.BoundCheck(f"lemma2[r={r:g}]", float(t), abs(g), c * (a + 1.0 / N),
                                                validation.LEMMA2_TOL))
    for t, a, op, p1 in zip(times, alphas, cols["op_distance"], cols.get("p1_defect", alphas)):
        checks.append(validation.BoundCheck("lemma1a_operator", float(t), op, 2 * math.sqrt(max(a, 0)) + 2 * a, 1e-9))
        checks.append(validation.BoundCheck("lemma1a_identity", float(t), abs(p1 - a), 0.0, 1e-10))
    for t, nd, hd in zip(times, cols["nbody_norm_drift"], cols["hartree_norm_drift"]):
        checks.append(validation.BoundCheck("nbody_norm", float(t), nd, 0.0, CONSERVATION_TOL))
        checks.append(validation.BoundCheck("hartree_norm", float(t), hd, 0.0, HARTREE_NORM_TOL))
    if summary.get("time_independent", False):
        e = cols["energy"]
        scale = max(1.0, abs(e[0]))
        for t, ei in zip(times, e):
            checks.append(validation.BoundCheck("energy", float(t), abs(ei - e[0]) / scale, 0.0, CONSERVATION_TOL))
    return checks


# --- sweep ---------------------------------------------------------------------------


def run_to_dir(cfg: ExperimentConfig, out_dir) -> dict:
    """Simulate and persist one run; errors are written as ``error.json``."""
    try:
        report = simulate(cfg)
    except HartreeLabError as exc:
        write_error(out_dir, exc)
        return {"particles": cfg.particle_list()[0], "error": exc.kind, "message": str(exc), "passed": False}
    write_report(report, out_dir)
    r0 = report.r_values[0]
    integral = _c_integral(report)
    return {
        "particles": report.particles,
        "passed": report.passed,
        "max_alpha": float(np.max(report.alpha_series)),
        "alpha0": float(report.alpha_series[0]),
        "c_integral": integral,
        "envelope": float(np.expm1(integral) / report.particles),
        "final_bound": float(report.gronwall_bound_series[r0][-1]),
    }


def _c_integral(report: RunReport) -> float:
    r0 = report.r_values[0]
    ct = report.c_t_series[r0]
    return float(integrate.trapezoid(ct, report.times)) if len(ct) > 1 else 0.0


def _run_entry(args):
    cfg, out_dir = args
    return run_to_dir(cfg, out_dir)


@dataclass
class SweepReport:
    entries: list
    slope: float
    slope_stderr: float
    slope_band: tuple
    passed: bool

    def as_dict(self) -> dict:
        return {"entries": self.entries, "slope": self.slope, "slope_stderr": self.slope_stderr,
                "slope_band_95": list(self.slope_band), "passed": self.passed}


def fit_loglog_slope(ns, values):
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = values > 0
    if ok.sum() < 2 or np.unique(ns[ok]).size < 2:
        return math.nan, math.nan, (math.nan, math.nan)
    fit = stats.linregress(np.log(ns[ok]), np.log(values[ok]))
    dof = ok.sum() - 2
    if dof > 0:
        half = stats.t.ppf(0.975, dof) * fit.stderr
    else:
        half = math.nan
    return float(fit.slope), float(fit.stderr), (float(fit.slope - half), float(fit.slope + half))


def sweep(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> SweepReport:
    ns = cfg.particle_list()
    if isinstance(cfg.particles, list) and not cfg.particles:
        raise InvalidArgumentError("sweep needs a non-empty particle list")
    out = Path(out_dir)
    tasks = [(cfg.for_particles(n), out / f"N{n}") for n in ns]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_run_entry, tasks))
    else:
        entries = [_run_entry(t) for t in tasks]
    good = [e for e in entries if "error" not in e]
    slope, stderr, band = fit_loglog_slope([e["particles"] for e in good], [e["max_alpha"] for e in good])
    passed = all(e["passed"] for e in entries) and all(
        e["max_alpha"] <= e["envelope"] + validation.GRONWALL_TOL for e in good
    )
    report = SweepReport(entries, slope, stderr, band, passed)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(json.dumps(_jsonable(report.as_dict()), indent=2, sort_keys=True) + "\n")
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["particles", "max_alpha", "envelope", "passed"])
        for e in good:
            writer.writerow([e["particles"], _fmt(e["max_alpha"]), _fmt(e["envelope"]), int(e["passed"])])
    return report
