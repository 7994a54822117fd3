"""SVG figures for persisted runs and sweeps."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InvalidArgumentError  # noqa: E402

# fixed metadata keeps the SVG bytes reproducible
_SVG_META = {"Date": None, "Creator": None}


def _require(series: dict, *names):
    for n in names:
        if n not in series or len(series[n]) == 0:
            raise InvalidArgumentError(f"cannot plot an empty series ({n!r})")


def _save(fig, path: Path) -> Path:
    plt.rcParams["svg.hashsalt"] = "hartree-lab"
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_run(series: dict, out_dir, N: int) -> list:
    """Alpha against its bound, |gamma| against the Lemma-2 envelope, distances against Lemma 1."""
    _require(series, "time", "alpha", "gamma", "gronwall_bound", "op_distance", "trace_distance")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = series["time"]
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, series["alpha"], label="alpha")
    ax.plot(t, series["gronwall_bound"], "--", label="Gronwall bound")
    ax.set_xlabel("t")
    ax.set_ylabel("alpha")
    ax.legend()
    paths.append(_save(fig, out / "alpha_bound.svg"))

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, np.abs(series["gamma"]), label="|gamma|")
    for name in sorted(k for k in series if k.startswith("c_t_r")):
        ax.plot(t, series[name] * (series["alpha"] + 1.0 / N), "--", label=f"rhs {name[4:]}")
    ax.set_xlabel("t")
    ax.set_yscale("log")
    ax.legend()
    paths.append(_save(fig, out / "gamma_bound.svg"))

    fig, ax = plt.subplots(figsize=(6, 4))
    a = np.maximum(series["alpha"], 0.0)
    ax.plot(t, series["op_distance"], label="operator distance")
    ax.plot(t, series["trace_distance"], label="trace distance")
    ax.plot(t, 2 * np.sqrt(a) + 2 * a, "--", label="2 sqrt(alpha) + 2 alpha")
    ax.set_xlabel("t")
    ax.legend()
    paths.append(_save(fig, out / "distances.svg"))
    return paths


def plot_sweep(ns, max_alpha, out_dir) -> Path:
    """``max_t alpha`` against N on log-log axes with a 1/N guide."""
    ns = np.asarray(ns, dtype=float)
    max_alpha = np.asarray(max_alpha, dtype=float)
    if ns.size == 0:
        raise InvalidArgumentError("cannot plot an empty sweep")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ns, max_alpha, "o-", label="max alpha")
    ax.loglog(ns, max_alpha[0] * ns[0] / ns, ":", label="1/N guide")
    ax.set_xlabel("N")
    ax.legend()
    return _save(fig, out / "n_decay.svg")
