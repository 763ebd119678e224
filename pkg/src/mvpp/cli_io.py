"""File formats, result records and the command-line interface.

Every command produces a `ResultRecord`. Its ``metrics`` depend only on
the inputs and the seed, so two runs with the same arguments give
byte-identical metrics; wall-clock timings live in a separate field.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
import scipy.sparse as sp

from .errors import InvalidInputError, MvppError, ParseError
from .eval import (
    average_roc,
    clustering_accuracy,
    clusterwise_loocv,
    kmeans_baseline,
    roc_from_ranking,
)
from .influence import influence_magnitudes, predictive_influence, rank_by_influence, rank_by_residual
from .linalg_core import Policy, sparse_from_triplets
from .model_selection import select_k, select_r
from .mvpp import MvppConfig, run
from .press import press_for
from .simgen import (
    SNR_GRID,
    ScenarioConfig,
    generate_influence_dataset,
    generate_line_plane,
    generate_scenario_a,
    generate_scenario_b,
)
from .tbpls import DataPair, fit, loo_prediction_error

COMMANDS = ("fit", "press", "influence", "cluster", "select-k", "select-r", "simulate", "roc-study", "benchmark")
SCHEMA_VERSION = 1

# ---------------------------------------------------------------- loaders


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_dense(path) -> np.ndarray:
    """Comma-separated numeric matrix; a non-numeric first row is taken as a header."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty file", 1)
    if not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
        if not rows:
            raise ParseError("file has a header but no data rows", 2)
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for k, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(f"expected {width} columns, found {len(cells)}", line)
        for j, c in enumerate(cells):
            try:
                out[k, j] = float(c)
            except ValueError:
                raise ParseError(f"non-numeric cell {c!r} in column {j + 1}", line) from None
    return out


def load_sparse_triplets(path, rows: int, cols: int) -> sp.csr_matrix:
    """Whitespace-separated ``row col value`` lines with 0-based indices."""
    r_idx, c_idx, vals, seen = [], [], [], {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'row col value', got {text!r}", line_no)
            try:
                r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"cannot parse {text!r}", line_no) from None
            if not (0 <= r < rows and 0 <= c < cols):
                raise ParseError(f"index ({r}, {c}) outside {rows}x{cols}", line_no)
            if (r, c) in seen:
                raise ParseError(f"duplicate entry ({r}, {c}), first seen on line {seen[(r, c)]}", line_no)
            seen[(r, c)] = line_no
            r_idx.append(r)
            c_idx.append(c)
            vals.append(v)
    return sparse_from_triplets(r_idx, c_idx, vals, (rows, cols))


def tfidf_transform(counts, variant: str = "smooth"):
    """Row-normalised term frequency times inverse document frequency.

    ``variant="smooth"`` uses ``ln(n / (1 + df))``; ``"plain"`` uses
    ``ln(n / df)`` with unused terms weighted 0. Sparse input stays sparse.
    """
    if variant not in ("smooth", "plain"):
        raise InvalidInputError(f"unknown tf-idf variant {variant!r}")
    is_sparse = sp.issparse(counts)
    m = sp.csr_matrix(counts, dtype=float) if is_sparse else np.asarray(counts, dtype=float)
    data = m.data if is_sparse else m
    if data.size and data.min() < 0:
        raise InvalidInputError("tf-idf needs non-negative counts")
    n = m.shape[0]
    totals = np.asarray(m.sum(axis=1)).ravel()
    df = np.asarray((m > 0).sum(axis=0)).ravel().astype(float)
    if variant == "smooth":
        idf = np.log(n / (1.0 + df))
    else:
        idf = np.zeros_like(df)
        idf[df > 0] = np.log(n / df[df > 0])
    inv = np.zeros(n)
    inv[totals > 0] = 1.0 / totals[totals > 0]
    if is_sparse:
        return sp.csr_matrix(sp.diags(inv) @ m @ sp.diags(idf))
    return inv[:, None] * m * idf[None, :]


def save_dense(path, m, header: list[str] | None = None) -> None:
    """Write a matrix as CSV with 17 significant digits (exact round trip)."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in m:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


# ----------------------------------------------------------- serialization


def _json_text(obj) -> str:
    """JSON with every float written to 17 significant digits; NaN and infinities as strings."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"NaN"'
        if math.isinf(x):
            return '"Infinity"' if x > 0 else '"-Infinity"'
        text = format(x, ".17g")
        return text if any(ch in text for ch in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json_text(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _revive(obj):
    specials = {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}
    if isinstance(obj, str) and obj in specials:
        return specials[obj]
    if isinstance(obj, list):
        return [_revive(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _revive(v) for k, v in obj.items()}
    return obj


@dataclass
class ExperimentSpec:
    command: str
    x: str | None = None
    y: str | None = None
    labels: str | None = None
    out: str | None = None
    format: str = "json"
    seed: int = 0
    k: int = 2
    r: int = 1
    k_max: int = 5
    r_max: int = 4
    restarts: int = 10
    max_iterations: int = 100
    snr: float = SNR_GRID[0]
    replicates: int = 20
    policy: str | None = None
    scenario: str = "a"
    n_per_cluster: int | None = None
    p: int = 200
    q: int = 200
    dims: str = "highdim"
    figure: str = "fig6"
    full_refit: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidInputError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise InvalidInputError(f"format must be json or csv, got {self.format!r}")


@dataclass
class ResultRecord:
    command: str
    config: dict
    metrics: dict
    timings: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return _json_text(asdict(self)) + "\n"

    def metrics_json(self) -> str:
        """The seed-determined part of the record, for reproducibility checks."""
        return _json_text(self.metrics)

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        raw = _revive(json.loads(text))
        return cls(**raw)

    def to_csv(self) -> str:
        """Curve rows from ``metrics["curve"]`` (a list of flat dicts)."""
        rows = self.metrics.get("curve")
        if not rows:
            raise InvalidInputError(f"command {self.command!r} produces no curve; use --format json")
        buf = io.StringIO()
        cols = list(rows[0])
        buf.write(",".join(cols) + "\n")
        for row in rows:
            buf.write(",".join(_csv_cell(row[c]) for c in cols) + "\n")
        return buf.getvalue()


def _csv_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def versions() -> dict:
    from . import __version__

    return {
        "mvpp": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------- helpers


def replicate_seeds(seed: int, n: int) -> list[int]:
    """Independent integer seeds for n replicates, derived from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def thread_count() -> int:
    raw = os.environ.get("MVPP_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInputError(f"MVPP_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidInputError("MVPP_THREADS must be >= 1")
    return n


def _map(fn, items):
    """Ordered map over replicates, threaded when MVPP_THREADS > 1."""
    threads = thread_count()
    if threads == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _load_pair(spec: ExperimentSpec, default_policy: str) -> DataPair:
    if not spec.x or not spec.y:
        raise InvalidInputError(f"{spec.command} needs --x and --y")
    return DataPair.from_raw(load_dense(spec.x), load_dense(spec.y), spec.policy or default_policy)


def _load_labels(path) -> np.ndarray:
    return load_dense(path).ravel().astype(int)


def _scenario_cfg(spec: ExperimentSpec, seed: int, snr: float | None = None) -> ScenarioConfig:
    npc = spec.n_per_cluster or (48 if spec.scenario == "b" else 50)
    return ScenarioConfig(k=spec.k, n_per_cluster=npc, p=spec.p, q=spec.q, snr=spec.snr if snr is None else snr, seed=seed)


def _mvpp_cfg(spec: ExperimentSpec, seed: int | None = None, k: int | None = None) -> MvppConfig:
    k = spec.k if k is None else k
    return MvppConfig(
        k=k,
        r_per_cluster=(spec.r,) * k,
        restarts=spec.restarts,
        max_iterations=spec.max_iterations,
        seed=spec.seed if seed is None else seed,
    )


# --------------------------------------------------------------- commands


def _cmd_fit(spec):
    data = _load_pair(spec, "center_and_scale")
    model = fit(data, spec.r)
    return {
        "n": data.n,
        "p": data.p,
        "q": data.q,
        "r_used": model.r,
        "rank_reduced": model.rank_reduced,
        "inner_coefficients": model.g,
        "singular_values": [f.lam for f in model.factors],
        "training_mse": float(np.mean(np.sum(model.residuals_y**2, axis=1))),
    }


def _cmd_press(spec):
    data = _load_pair(spec, "center_and_scale")
    model = fit(data, spec.r)
    rep = press_for(model, data)
    out = {
        "press": rep.press_value,
        "loo_error_norms": np.sqrt(np.sum(rep.loo_errors**2, axis=1)),
        "clamped_points": rep.clamped_points,
    }
    if spec.full_refit:
        out["full_refit_press"] = loo_prediction_error(data, spec.r, spec.policy or "center_and_scale")[1]
    return out


def _cmd_influence(spec):
    data = _load_pair(spec, "center_and_scale")
    model = fit(data, spec.r)
    mags, bad = influence_magnitudes(model, data, data.x, data.y, np.arange(data.n))
    return {
        "influence_magnitudes": mags,
        "ranking": rank_by_influence(mags),
        "degenerate_points": np.flatnonzero(bad),
    }


def _cmd_cluster(spec):
    data = _load_pair(spec, "none")
    state = run(data, _mvpp_cfg(spec))
    out = {
        "assignments": state.assignments,
        "objective": state.objective,
        "objective_trace": state.objective_trace,
        "converged": state.converged,
        "iterations": state.iterations_used,
        "restart_objectives": state.restart_objectives,
    }
    if spec.labels:
        out["accuracy"] = clustering_accuracy(state.assignments, _load_labels(spec.labels)).accuracy
    return out


def _curve_rows(curve, name):
    rows = []
    for i, value in enumerate(curve.parameter_values):
        row = {name: value, "mean_press": curve.mean_press[i]}
        if curve.objective_values:
            row["objective"] = curve.objective_values[i]
        if curve.std_press:
            row["std_press"] = curve.std_press[i]
        rows.append(row)
    return rows


def _cmd_select_k(spec):
    data = _load_pair(spec, "none")
    curve = select_k(data, spec.k_max, _mvpp_cfg(spec))
    return {"chosen": curve.chosen, "skipped": curve.skipped, "curve": _curve_rows(curve, "k")}


def _cmd_select_r(spec):
    data = _load_pair(spec, "none")
    curve = select_r(data, spec.r_max)
    return {"chosen": curve.chosen, "skipped": curve.skipped, "curve": _curve_rows(curve, "r")}


def _generate(spec, seed):
    s = spec.scenario
    if s == "a":
        return generate_scenario_a(_scenario_cfg(spec, seed))
    if s == "b":
        return generate_scenario_b(_scenario_cfg(spec, seed))
    if s in ("influence-lowdim", "influence-highdim"):
        return generate_influence_dataset(s.split("-")[1], seed)
    if s == "line-plane":
        return generate_line_plane(seed)
    raise InvalidInputError(f"unknown scenario {s!r}")


def _cmd_simulate(spec):
    if not spec.out:
        raise InvalidInputError("simulate needs --out DIR")
    ds = _generate(spec, spec.seed)
    outdir = Path(spec.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_dense(outdir / "x.csv", ds.x)
    save_dense(outdir / "y.csv", ds.y)
    save_dense(outdir / "labels.csv", ds.true_labels[:, None])
    files = {"x": "x.csv", "y": "y.csv", "labels": "labels.csv"}
    if ds.influential_indices is not None:
        save_dense(outdir / "influential.csv", ds.influential_indices[:, None])
        files["influential"] = "influential.csv"
    return {
        "generator": ds.generator_tag,
        "x_shape": list(ds.x.shape),
        "y_shape": list(ds.y.shape),
        "files": files,
    }


def roc_replicate(dims: str, seed: int):
    """Influence and residual ROC curves on one influential-observation dataset."""
    ds = generate_influence_dataset(dims, seed)
    data = DataPair.from_raw(ds.x, ds.y, "center_and_scale")
    model = fit(data, 1)
    inf = predictive_influence(model, data)
    return (
        roc_from_ranking(rank_by_influence(inf), ds.influential_indices, data.n),
        roc_from_ranking(rank_by_residual(model, data), ds.influential_indices, data.n),
    )


def _cmd_roc_study(spec):
    pairs = _map(lambda s: roc_replicate(spec.dims, s), replicate_seeds(spec.seed, spec.replicates))
    grid = np.linspace(0.0, 1.0, 101)
    _, tpr_inf = average_roc([a for a, _ in pairs], grid)
    _, tpr_res = average_roc([b for _, b in pairs], grid)
    return {
        "mean_auc_influence": float(np.mean([a.auc for a, _ in pairs])),
        "mean_auc_residual": float(np.mean([b.auc for _, b in pairs])),
        "mean_fpr_at_full_recall_influence": float(np.mean([a.fpr_at_full_recall() for a, _ in pairs])),
        "mean_fpr_at_full_recall_residual": float(np.mean([b.fpr_at_full_recall() for _, b in pairs])),
        "curve": [
            {"fpr": float(f), "tpr_influence": float(a), "tpr_residual": float(b)}
            for f, a, b in zip(grid, tpr_inf, tpr_res)
        ],
    }


def _clustering_replicate(spec, scenario, snr, seed):
    cfg = ScenarioConfig(n_per_cluster=48 if scenario == "b" else 50, p=spec.p, q=spec.q, snr=snr, seed=seed)
    ds = generate_scenario_a(cfg) if scenario == "a" else generate_scenario_b(cfg)
    data = DataPair.from_raw(ds.x, ds.y, "none")
    state = run(data, _mvpp_cfg(spec, seed=seed, k=2))
    return (
        clustering_accuracy(state.assignments, ds.true_labels).accuracy,
        clustering_accuracy(kmeans_baseline(ds.x, 2, seed), ds.true_labels).accuracy,
        state,
        data,
    )


def _cmd_benchmark(spec):
    seeds = replicate_seeds(spec.seed, spec.replicates)
    fig = spec.figure
    if fig in ("fig6", "fig7"):
        scenario = "a" if fig == "fig6" else "b"
        rows = []
        for snr in SNR_GRID:
            res = _map(lambda s: _clustering_replicate(spec, scenario, snr, s), seeds)
            mv = [r[0] for r in res]
            km = [r[1] for r in res]
            rows.append(
                {
                    "log10_snr": round(math.log10(snr), 6),
                    "mvpp_mean": float(np.mean(mv)),
                    "mvpp_std": float(np.std(mv)),
                    "kmeans_mean": float(np.mean(km)),
                    "kmeans_std": float(np.std(km)),
                }
            )
        return {"figure": fig, "curve": rows}
    if fig == "fig8":
        rows = []
        for snr in SNR_GRID:
            res = _map(lambda s: _clustering_replicate(spec, "a", snr, s), seeds)
            mv = [clusterwise_loocv(r[2].assignments, r[3], 1, policy="none") for r in res]
            gl = [loo_prediction_error(r[3], 1, "none")[1] for r in res]
            rows.append({"log10_snr": round(math.log10(snr), 6), "mvpp_loocv": float(np.mean(mv)), "global_loocv": float(np.mean(gl))})
        return {"figure": fig, "curve": rows}
    if fig == "fig9":
        def one(s):
            ds = generate_scenario_a(_scenario_cfg(spec, s))
            return select_k(DataPair.from_raw(ds.x, ds.y, "none"), spec.k_max, _mvpp_cfg(spec, seed=s))

        curves = _map(one, seeds)
        ks = curves[0].parameter_values
        rows = [
            {
                "k": k,
                "mean_press": float(np.mean([c.mean_press[i] for c in curves])),
                "std_press": float(np.std([c.mean_press[i] for c in curves])),
                "mean_objective": float(np.mean([c.objective_values[i] for c in curves])),
            }
            for i, k in enumerate(ks)
        ]
        return {"figure": fig, "chosen": [c.chosen for c in curves], "curve": rows}
    if fig == "fig10":
        rows = []
        for snr in SNR_GRID:
            chosen = []
            for s in seeds:
                ds = generate_scenario_a(_scenario_cfg(spec, s, snr))
                data = DataPair.from_raw(ds.x, ds.y, "none")
                sub = data.subset(np.flatnonzero(ds.true_labels == 1))
                chosen.append(select_r(sub, spec.r_max).chosen)
            counts = np.bincount(chosen, minlength=spec.r_max + 1)
            rows.append({"log10_snr": round(math.log10(snr), 6), **{f"r{r}": int(counts[r]) for r in range(1, spec.r_max + 1)}})
        return {"figure": fig, "curve": rows}
    raise InvalidInputError(f"unknown figure {fig!r}; expected fig6, fig7, fig8, fig9 or fig10")


_DISPATCH = {
    "fit": _cmd_fit,
    "press": _cmd_press,
    "influence": _cmd_influence,
    "cluster": _cmd_cluster,
    "select-k": _cmd_select_k,
    "select-r": _cmd_select_r,
    "simulate": _cmd_simulate,
    "roc-study": _cmd_roc_study,
    "benchmark": _cmd_benchmark,
}


def run_experiment(spec: ExperimentSpec) -> ResultRecord:
    """Run one command and return its record (nothing is written here)."""
    t0 = time.perf_counter()
    metrics = _DISPATCH[spec.command](spec)
    elapsed = time.perf_counter() - t0
    return ResultRecord(spec.command, asdict(spec), metrics, {"seconds": elapsed}, versions())


def write_record(record: ResultRecord, spec: ExperimentSpec) -> str:
    text = record.to_csv() if spec.format == "csv" else record.to_json()
    if spec.out and spec.command != "simulate":
        Path(spec.out).write_text(text, encoding="utf-8")
    elif spec.command == "simulate" and spec.out:
        (Path(spec.out) / "record.json").write_text(record.to_json(), encoding="utf-8")
    return text


# -------------------------------------------------------------------- cli


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvpp", description="Multi-view predictive partitioning with TB-PLS.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "fit": "fit a TB-PLS model and report its factors",
        "press": "leave-one-out prediction error of a TB-PLS fit",
        "influence": "per-point predictive influence",
        "cluster": "multi-view predictive partitioning",
        "select-k": "choose the number of clusters by PRESS",
        "select-r": "choose the number of latent factors by PRESS",
        "simulate": "write a synthetic dataset to --out DIR",
        "roc-study": "influence vs residual ROC over simulated replicates",
        "benchmark": "simulation curves (fig6 .. fig10) as CSV-ready rows",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("--x", help="dense CSV for the first view")
        p.add_argument("--y", help="dense CSV for the second view")
        p.add_argument("--labels", help="CSV column of true 1-based labels (cluster)")
        p.add_argument("--out", help="output file (a directory for simulate)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--r", type=int, default=1)
        p.add_argument("--restarts", type=int, default=10)
        p.add_argument("--snr", type=float, default=SNR_GRID[0])
        p.add_argument("--replicates", type=int, default=20)
        p.add_argument(
            "--policy",
            choices=[pol.value for pol in Policy],
            help="column standardisation; default center_and_scale for fit/press/influence, none for clustering",
        )
        if name == "select-k":
            p.add_argument("--k-max", type=int, default=5)
        if name == "select-r":
            p.add_argument("--r-max", type=int, default=4)
        if name == "press":
            p.add_argument("--full-refit", action="store_true", help="also compute the full-refit LOO error")
        if name in ("simulate", "benchmark"):
            p.add_argument(
                "--scenario",
                default="a",
                choices=("a", "b", "influence-lowdim", "influence-highdim", "line-plane"),
            )
            p.add_argument("--n-per-cluster", type=int)
            p.add_argument("--p", type=int, default=200)
            p.add_argument("--q", type=int, default=200)
        if name == "roc-study":
            p.add_argument("--dims", choices=("lowdim", "highdim"), default="highdim")
        if name == "benchmark":
            p.add_argument("--figure", choices=("fig6", "fig7", "fig8", "fig9", "fig10"), default="fig6")
            p.add_argument("--k-max", type=int, default=5)
            p.add_argument("--r-max", type=int, default=4)
    return parser


def spec_from_args(argv) -> ExperimentSpec:
    ns = vars(build_parser().parse_args(argv))
    return ExperimentSpec(**{k: v for k, v in ns.items() if v is not None or k == "policy"})


def error_object(exc: BaseException) -> dict:
    code = getattr(exc, "code", "internal_error") if isinstance(exc, MvppError) else "internal_error"
    return {"error": {"code": code, "type": type(exc).__name__, "message": str(exc)}}


def main(argv=None) -> int:
    try:
        spec = spec_from_args(sys.argv[1:] if argv is None else argv)
        record = run_experiment(spec)
        text = write_record(record, spec)
        if not spec.out:
            sys.stdout.write(text)
        return 0
    except MvppError as exc:
        sys.stderr.write(json.dumps(error_object(exc)) + "\n")
        return 2
    except (OSError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(json.dumps(error_object(exc)) + "\n")
        return 1
