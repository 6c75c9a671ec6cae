"""Experiment drivers behind the ``hankel-lti`` command line.

Every command is a pure function of a parameter dict (seed included) that
returns a :class:`Table`; trial ``k`` draws from its own Philox stream, so
results do not depend on thread count or scheduling.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from . import numerics
from .hankel import (
    GridSpec,
    balanced_truncation,
    eps_rank,
    hinf_distance,
    hsv_histogram,
    hsvd,
    hsvd_markov,
    tightness_constructions,
    verify_theorem2,
    verify_theorem4,
)
from .hope import MarkovParams, ho_kalman, hope_forward, make_plan, direct_convolution
from .init_schemes import (
    Gamma1Config,
    Gamma2Config,
    s4d_legs_diag,
    sample_diagonal,
    sample_gamma1,
    sample_gamma2,
    sample_markov,
)
from .lti import (
    bilinear_forward,
    bilinear_inverse,
    impulse_response,
    simulate_recurrence,
    time_scale,
    transfer_continuous,
)

DEFAULT_SEED = 20240601
SEED_ENV = "HANKEL_LTI_SEED"
SCHEMES = ("gamma1", "gamma2", "gamma2-alpha", "gamma3", "markov")


class UsageError(ValueError):
    """Invalid command parameters (exit code 1)."""


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from exc
    return DEFAULT_SEED


def trial_rng(seed: int, *key: int) -> numerics.SeededRng:
    """Stream for one trial; ``key`` (e.g. ``(n, k)``) is folded into the stream id."""
    stream = 0
    for part in key:
        stream = (stream * 1_000_003 + int(part) + 1) & 0xFFFFFFFFFFFFFFFF
    return numerics.SeededRng(seed, stream)


def pmap(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Ordered map, optionally over a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "{:.17g}".format(float(v))
    return str(v)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]
    summary: dict = field(default_factory=dict)
    plot: Optional[str] = None  # line | histogram | quantile-band
    passed: Optional[bool] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        recs = [{c: _json_value(v) for c, v in zip(self.columns, row)} for row in self.rows]
        doc = {"columns": self.columns, "rows": recs,
               "summary": {k: _json_value(v) for k, v in self.summary.items()}}
        if self.passed is not None:
            doc["passed"] = self.passed
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def loglog_slope(xs, ys) -> float:
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    ok = (xs > 0) & (ys > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def loglinear_fit(t, y) -> tuple[float, float]:
    """Least-squares fit of ``log y`` against ``t``; returns ``(slope, R^2)``."""
    t = np.asarray(t, float)
    ly = np.log(np.asarray(y, float))
    p = np.polyfit(t, ly, 1)
    ss_res = float(np.sum((ly - np.polyval(p, t)) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    return float(p[0]), (1.0 - ss_res / ss_tot) if ss_tot > 0 else float("nan")


# ---------------------------------------------------------------------------
# scheme dispatch
# ---------------------------------------------------------------------------

def _check_scheme(scheme: str):
    if scheme not in SCHEMES:
        raise UsageError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")


def sample_scheme(scheme: str, n: int, rng, alpha: float = 1.0, gamma1: Optional[dict] = None):
    """A system (or :class:`MarkovParams`) drawn from one of the named schemes."""
    _check_scheme(scheme)
    if scheme == "markov":
        return sample_markov(n, rng=rng)
    if scheme == "gamma2":
        return sample_gamma2(Gamma2Config(n), rng=rng)
    if scheme == "gamma2-alpha":
        return sample_gamma2(Gamma2Config(n, "boundary-exponent", alpha), rng=rng)
    if scheme == "gamma3":
        return s4d_legs_diag(n, rng=rng, method="lapack")
    return sample_gamma1(Gamma1Config(n, **(gamma1 or {})), rng=rng, method="lapack").system


def spectrum_of(obj) -> np.ndarray:
    if isinstance(obj, MarkovParams):
        return hsvd_markov(obj.h, method="lapack").sigma
    return hsvd(obj, method="lapack").sigma


def _gamma1_opts(p: dict) -> dict:
    return {k: p[k] for k in ("s_max", "r_min", "r_max") if p.get(k) is not None}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_eps_rank_sweep(p: dict) -> Table:
    scheme, eps, trials = p["scheme"], float(p["eps"]), int(p["trials"])
    _check_scheme(scheme)
    if trials < 1:
        raise UsageError("trials must be >= 1")
    n_list = [int(n) for n in p["n_list"]]
    if not n_list or min(n_list) < 1:
        raise UsageError("n_list must hold positive sizes")
    if scheme == "gamma3" and any(n % 2 for n in n_list):
        raise UsageError("gamma3 needs even n")
    seed = p["seed"]

    def one(job):
        n, k = job
        obj = sample_scheme(scheme, n, trial_rng(seed, n, k), p.get("alpha", 1.0), _gamma1_opts(p))
        return eps_rank(spectrum_of(obj), eps)

    jobs = [(n, k) for n in n_list for k in range(trials)]
    ranks = np.array(pmap(one, jobs, p.get("threads", 1)), dtype=float).reshape(len(n_list), trials)
    med = np.median(ranks, axis=1)
    slope = loglog_slope(n_list, med)
    rows = []
    for n, r, m in zip(n_list, ranks, med):
        rows.append((n, trials, float(r.mean()), float(m), float(np.percentile(r, 10)),
                     float(np.percentile(r, 90)), slope))
    return Table(["n", "trials", "mean", "median", "p10", "p90", "slope"], rows,
                 {"slope": slope, "eps": eps, "scheme": scheme}, plot="line")


def perturb_object(obj, magnitude: float, rng):
    """Random perturbation of relative size ``magnitude``.

    Diagonal systems: only ``Im a`` moves, by ``magnitude * ||A||_2`` in the
    max norm. Markov parameters: ``h`` moves by ``magnitude * ||h||_2``.
    """
    g = numerics._gen(rng)
    if isinstance(obj, MarkovParams):
        v = g.standard_normal(obj.n)
        return MarkovParams(obj.h + magnitude * np.linalg.norm(obj.h) * v / np.linalg.norm(v), obj.d)
    v = g.standard_normal(obj.n)
    shift = magnitude * np.abs(obj.a).max() * v / np.abs(v).max()
    return obj.replace(a=obj.a + 1j * shift)


def cmd_perturb(p: dict) -> Table:
    scheme, n, trials, seed = p["scheme"], int(p["n"]), int(p["trials"]), p["seed"]
    _check_scheme(scheme)
    if trials < 1:
        raise UsageError("trials must be >= 1")
    mags = [float(m) for m in p["magnitudes"]]
    if any(not 0 <= m < 1 for m in mags):
        raise UsageError("perturbation magnitudes must lie in [0, 1)")
    levels = [0.0] + [m for m in mags if m != 0.0]
    eps = float(p.get("eps", 0.01))

    def one(k):
        base = sample_scheme(scheme, n, trial_rng(seed, n, k, 0), p.get("alpha", 1.0), _gamma1_opts(p))
        out = []
        for i, m in enumerate(levels):
            obj = base if m == 0 else perturb_object(base, m, trial_rng(seed, n, k, i + 1))
            s = spectrum_of(obj)
            out.append((m, s / s[0], eps_rank(s, eps)))
        return out

    results = pmap(one, list(range(trials)), p.get("threads", 1))
    rows = []
    for k, res in enumerate(results):
        for m, ratio, r in res:
            for j, v in enumerate(ratio):
                rows.append((k, m, j + 1, float(v), r))
    ranks = np.array([[r for _, _, r in res] for res in results], dtype=float)
    curves = np.array([[ratio for _, ratio, _ in res] for res in results])
    summary = {"scheme": scheme, "eps": eps}
    for i, m in enumerate(levels):
        summary[f"median_eps_rank@{m:g}"] = float(np.median(ranks[:, i]))
        if i:
            summary[f"max_ratio_gap@{m:g}"] = float(np.abs(curves[:, i] - curves[:, 0]).max())
    base_med = summary["median_eps_rank@0"]
    for m in levels[1:]:
        summary[f"median_rank_drop@{m:g}"] = 1.0 - summary[f"median_eps_rank@{m:g}"] / base_med
    return Table(["trial", "magnitude", "index", "ratio", "eps_rank"], rows, summary, plot="line")


def _memory_responses(p: dict) -> np.ndarray:
    scheme, n, T, dt, count, seed = p["scheme"], int(p["n"]), int(p["T"]), float(p["dt"]), int(p["count"]), p["seed"]
    if scheme not in ("s4d-like", "hope"):
        raise UsageError(f"memory scheme must be 's4d-like' or 'hope', got {scheme!r}")
    if T < n:
        raise UsageError(f"T must be >= n (T={T}, n={n})")
    if count < 1:
        raise UsageError("count must be >= 1")
    if not dt > 0:
        raise UsageError("dt must be positive")
    if scheme == "hope":
        plan = make_plan(n, T, dt)
        delta = np.zeros(T)
        delta[0] = 1.0

        def one(k):
            return np.abs(hope_forward(sample_markov(n, rng=trial_rng(seed, n, k)), delta, plan))
    else:
        if n % 2:
            raise UsageError("s4d-like needs even n")

        def one(k):
            sys = s4d_legs_diag(n, rng=trial_rng(seed, n, k), method="lapack")
            return impulse_response(bilinear_forward(time_scale(sys, dt)), T)

    return np.array(pmap(one, list(range(count)), p.get("threads", 1)))


def cmd_memory(p: dict) -> Table:
    Y = _memory_responses(p)
    n, T = int(p["n"]), int(p["T"])
    q = np.percentile(Y, [0, 25, 50, 75, 100], axis=0)
    rows = [(t, *(float(v) for v in q[:, t])) for t in range(T)]
    window = int(p.get("fit_window") or n)
    t = np.arange(1, min(window, T))
    med = q[2]
    summary: dict[str, Any] = {"scheme": p["scheme"], "fit_window": window}
    if t.size >= 2 and np.all(med[t] > 0):
        slope, r2 = loglinear_fit(t, med[t])
        summary.update(fit_slope=slope, fit_r2=r2)
    if p["scheme"] == "hope":
        summary["max_after_n"] = float(Y[:, n + 1:].max()) if T > n + 1 else 0.0
    return Table(["t", "min", "q1", "median", "q3", "max"], rows, summary, plot="quantile-band")


def cmd_histogram(p: dict) -> Table:
    scheme, n, count, seed = p["scheme"], int(p["n"]), int(p["count"]), p["seed"]
    bins, floor = int(p.get("bins", 40)), float(p.get("log_floor", 1e-8))
    if count < 1:
        raise UsageError("count must be >= 1")
    if p.get("params"):
        with open(p["params"], encoding="utf-8") as fh:
            fixture = MarkovParams.loads(fh.read())
        spectra = [spectrum_of(fixture)]
    else:
        _check_scheme(scheme)

        def one(k):
            return spectrum_of(sample_scheme(scheme, n, trial_rng(seed, n, k), p.get("alpha", 1.0), _gamma1_opts(p)))

        spectra = pmap(one, list(range(count)), p.get("threads", 1))
    try:
        hist = hsv_histogram(spectra, bins=bins, log_floor=floor)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = [(float(lo), float(hi), int(c)) for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts)]
    summary = {"scheme": scheme, "total": hist.total, "clamped": hist.clamped, "frac_above_0.01": hist.frac_above}
    return Table(["bin_lo", "bin_hi", "count"], rows, summary, plot="histogram")


def cmd_kernel(p: dict) -> Table:
    """Impulse response of one Markov-parameter kernel, ``(index, re, im, abs)``."""
    n, L, dt = int(p["n"]), int(p["L"]), float(p["dt"])
    if p.get("params"):
        with open(p["params"], encoding="utf-8") as fh:
            params = MarkovParams.loads(fh.read())
        n = params.n
    else:
        params = sample_markov(n, rng=trial_rng(p["seed"], n, 0))
    if L < 1 or not dt > 0:
        raise UsageError("need L >= 1 and dt > 0")
    delta = np.zeros(L)
    delta[0] = 1.0
    y = hope_forward(params, delta, make_plan(n, L, dt, mode=p.get("mode", "causal")))
    rows = [(k, float(v.real), float(v.imag), float(abs(v))) for k, v in enumerate(y)]
    return Table(["index", "re", "im", "abs"], rows, {"n": n, "L": L, "dt": dt}, plot="line")


# -- verification ------------------------------------------------------------

def _admissible_perturbation(sys, rng):
    g = numerics._gen(rng)
    re = np.abs(sys.a.real)
    r = sys.residues
    n = sys.n
    dA = float(g.uniform() * re.min() / 2)
    dB = float(g.uniform() * np.abs(r).min())
    # radii drawn inside the admissible balls, never on their edge
    pa = sys.a + dA * np.sqrt(g.uniform(size=n)) * np.exp(2j * np.pi * g.uniform(size=n))
    rt = r + np.minimum(np.abs(r), dB) * np.sqrt(g.uniform(size=n)) * np.exp(2j * np.pi * g.uniform(size=n))
    return sys.replace(a=pa, c=rt / sys.b), dA, dB


def _verify_theorem2(p, trials, seed, slack):
    n = int(p.get("n") or 16)

    def one(k):
        sys = sample_diagonal(n, trial_rng(seed, n, k, 0))
        pert, dA, dB = _admissible_perturbation(sys, trial_rng(seed, n, k, 1))
        rep = verify_theorem2(sys, pert, dA, dB, slack=slack)
        tight = tightness_constructions(sys, dA, dB, slack=slack)
        ok = rep.holds and tight.holds
        return [(k, "bound", rep.measured, rep.bound, rep.measured <= rep.bound + slack),
                (k, "tight-a", tight.measured_a, tight.lower_a, tight.measured_a >= tight.lower_a - slack),
                (k, "tight-b", tight.measured_b, tight.lower_b, tight.measured_b >= tight.lower_b - slack)]

    return [row for rows in pmap(one, list(range(trials)), p.get("threads", 1)) for row in rows]


def _verify_theorem4(p, trials, seed, slack):
    n = int(p.get("n") or 64)

    def one(k):
        rng = trial_rng(seed, n, k)
        h = numerics.draw_complex_gaussian(rng, n)
        size = 10.0 ** numerics._gen(rng).uniform(-3, 0)
        ht = h + size * numerics.draw_complex_gaussian(rng, n)
        measured, bound = verify_theorem4(h, ht)
        return (k, "bound", measured, bound, measured <= bound + slack)

    return pmap(one, list(range(trials)), p.get("threads", 1))


def _verify_rom(p, trials, seed, slack):
    n = int(p.get("n") or 16)
    orders = [k for k in (4, 8, 12) if k <= n]

    def one(t):
        sys = sample_diagonal(n, trial_rng(seed, n, t))
        G = lambda s: transfer_continuous(sys, s)
        out = []
        for k in orders:
            bt = balanced_truncation(sys, k, method="lapack")
            m = hinf_distance(G, lambda s: transfer_continuous(bt.reduced, s)).value
            out.append((t, f"k={k}", m, bt.bound, m <= bt.bound + slack))
        return out

    return [row for rows in pmap(one, list(range(trials)), p.get("threads", 1)) for row in rows]


def kernel_errors(params: MarkovParams, u, dt: float) -> dict:
    """Max abs error of causal ``hope_forward`` against the recurrence (and direct convolution at ``dt = 1``)."""
    y = hope_forward(params, u, make_plan(params.n, len(u), dt))
    sys = ho_kalman(params.h, d=params.d)
    scaled = bilinear_forward(time_scale(bilinear_inverse(sys), dt))
    out = {"recurrence": float(np.abs(y - simulate_recurrence(scaled, u)).max())}
    if dt == 1.0:
        out["direct"] = float(np.abs(y - direct_convolution(params, u)).max())
    return out


def _verify_kernel(p, trials, seed, slack):
    n, L = int(p.get("n") or 16), int(p.get("L") or 256)
    tol = float(p.get("kernel_tol") or 1e-8)

    def one(k):
        rng = trial_rng(seed, n, k)
        params = MarkovParams(numerics.draw_complex_gaussian(rng, n), complex(numerics.draw_complex_gaussian(rng)))
        u = numerics.draw_complex_gaussian(rng, L)
        rows = []
        for dt in (1.0, 0.5, 0.1):
            for route, err in kernel_errors(params, u, dt).items():
                rows.append((k, f"{route}@dt={dt:g}", err, tol, err < tol))
        return rows

    return [row for rows in pmap(one, list(range(trials)), p.get("threads", 1)) for row in rows]


def cmd_verify(p: dict) -> Table:
    theorem, trials, seed = str(p["theorem"]), int(p["trials"]), p["seed"]
    if trials < 1:
        raise UsageError("trials must be >= 1")
    slack = float(p.get("slack") if p.get("slack") is not None else 1e-6)
    runners = {"2": _verify_theorem2, "4": _verify_theorem4, "rom": _verify_rom, "kernel": _verify_kernel}
    if theorem not in runners:
        raise UsageError(f"unknown theorem {theorem!r}; choose from {', '.join(runners)}")
    rows = runners[theorem](p, trials, seed, slack)
    violations = sum(1 for r in rows if not r[-1])
    ratios = [r[2] / r[3] for r in rows if r[1] == "bound" and r[3] > 0]
    summary = {"theorem": theorem, "checks": len(rows), "violations": violations}
    if ratios:
        summary["max_measured_over_bound"] = float(max(ratios))
    t = Table(["trial", "check", "measured", "reference", "ok"], rows, summary)
    t.passed = violations == 0
    return t


COMMANDS: dict[str, Callable[[dict], Table]] = {
    "eps-rank-sweep": cmd_eps_rank_sweep,
    "perturb": cmd_perturb,
    "memory": cmd_memory,
    "verify": cmd_verify,
    "histogram": cmd_histogram,
    "kernel": cmd_kernel,
}


# ---------------------------------------------------------------------------
# artifacts and manifests
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    table: Table
    outputs: list[str]
    manifest_path: str


def write_run(command: str, params: dict, out_dir: str, fmt: str = "csv", svg: bool = False,
              timestamp: Optional[str] = None) -> RunResult:
    """Run ``command`` and write its table, optional SVG and a manifest into ``out_dir``."""
    import datetime

    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}")
    if fmt not in ("csv", "json"):
        raise UsageError(f"unknown format {fmt!r}")
    table = COMMANDS[command](params)
    os.makedirs(out_dir, exist_ok=True)
    data_path = os.path.join(out_dir, f"{command}.{fmt}")
    with open(data_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.to_csv() if fmt == "csv" else table.to_json())
    outputs = [data_path]
    if svg and table.plot:
        from .plotting import emit_svg

        svg_path = os.path.join(out_dir, f"{command}.svg")
        csv_text = table.to_csv()
        emit_svg(csv_text, table.plot, svg_path, title=command, **plot_options(command, table))
        outputs.append(svg_path)
    manifest = {
        "command": command,
        "params": params,
        "seed": params.get("seed"),
        "format": fmt,
        "svg": svg,
        "timestamp": timestamp or datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "summary": {k: _json_value(v) for k, v in table.summary.items()},
        "passed": table.passed,
        "outputs": [{"path": os.path.basename(o), "sha256": sha256_file(o)} for o in outputs],
    }
    manifest_path = os.path.join(out_dir, f"{command}.manifest.json")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult(table, outputs, manifest_path)


def plot_options(command: str, table: Table) -> dict:
    if command == "eps-rank-sweep":
        return {"x": "n", "y": ["median", "p10", "p90"], "log_x": True, "log_y": True}
    if command == "perturb":
        return {"x": "index", "y": ["ratio"], "log_y": True, "group": "magnitude"}
    if command == "kernel":
        return {"x": "index", "y": ["abs"]}
    if command == "memory":
        return {"log_y": True}
    return {}


@dataclass
class ReplayReport:
    manifest: dict
    matches: dict  # file name -> bool (data files only)
    out_dir: str

    @property
    def identical(self) -> bool:
        return bool(self.matches) and all(self.matches.values())


def replay(manifest_path: str, out_dir: str) -> ReplayReport:
    """Re-run a manifest into ``out_dir`` and compare data-file hashes."""
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    res = write_run(manifest["command"], manifest["params"], out_dir, manifest.get("format", "csv"),
                    manifest.get("svg", False))
    fresh = {os.path.basename(o): sha256_file(o) for o in res.outputs}
    matches = {}
    for rec in manifest["outputs"]:
        name = rec["path"]
        if name.endswith((".csv", ".json")):
            matches[name] = fresh.get(name) == rec["sha256"]
    return ReplayReport(manifest, matches, out_dir)
