"""Experiment configuration, the ``run_experiment`` pipeline and the
``tenrec`` command line.

Every stage draws its randomness from ``SeedSequence([seed, crc32(stage)])``
so a stage can be rerun on its own and still see the same numbers.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .degrade import observe, smooth_lowrank
from .io import IMAGE_SUFFIXES, ingest_image_stack, read_tensor, write_tensor
from .metrics import evaluate
from .prox import PenaltySpec
from .rcompress import FixedAccuracyConfig, FixedRankConfig, compress_fixed_accuracy, compress_fixed_rank
from .regularizer import GntctvSpec
from .sketch import SketchSpec
from .solvers import SolverConfig, solve_gnqrtc, solve_gnqtc, solve_gnrtc, solve_gntc

log = logging.getLogger("tenrec")

TASKS = ("compress", "complete", "robust", "quantized-complete", "quantized-robust", "bench")
COMMANDS = {
    "compress": "compress",
    "complete": "complete",
    "robust": "robust",
    "qcomplete": "quantized-complete",
    "qrobust": "quantized-robust",
    "bench": "bench",
}
RESULT_COLUMNS = ("task", "dataset", "SR", "NR", "sigma", "delta", "backend",
                  "mpsnr", "mssim", "mrse", "seconds", "seed")
THREADS_ENV = "TENREC_NUM_THREADS"


@dataclass
class ExperimentConfig:
    task: str = "complete"
    input: str = "synthetic"
    layout: str = "auto"
    output_dir: str = "out"
    seed: int = 0
    # synthetic input
    synthetic_shape: list = field(default_factory=lambda: [30, 30, 30])
    synthetic_ranks: list = field(default_factory=lambda: [2, 2, 2])
    # degradation
    sr: float = 0.3
    nr: float = 0.0
    sigma: float = 0.0
    delta: float | None = None
    # solver
    penalty: str = "l1"
    noise_penalty: str = "l1"
    noise_structure: str = "entrywise"
    gradient_modes: list | None = None
    lam: float | None = None
    lam1: float = 3e-4
    lam2: float | None = None
    alpha: float = 1.0
    rho0: float = 1e-2
    rho_growth: float = 1.1
    rho_max: float = 1e6
    tol: float = 1e-5
    max_iters: int = 200
    backend: str = "exact"
    rank_guess: int = 10
    rank_buffer: int = 5
    # compressor
    ranks: list | None = None
    accuracy: float | None = None
    sketch: str = "gaussian"
    oversampling: int = 5
    power_iters: int = 1
    block: int = 10
    # bench
    experiments: list = field(default_factory=list)
    workers: int = 1

    def validate(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.task == "compress" and (self.ranks is None) == (self.accuracy is None):
            raise ValueError("compress needs exactly one of 'ranks' or 'accuracy'")
        if self.task.startswith("quantized") and self.delta is None:
            raise ValueError(f"{self.task} needs a quantizer resolution 'delta'")
        if not self.task.startswith("quantized") and self.task != "bench" and self.delta is not None:
            raise ValueError(f"{self.task} does not take 'delta'")
        if self.task == "bench" and not self.experiments:
            raise ValueError("bench needs a nonempty 'experiments' list")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path) -> dict:
    """Read a YAML or JSON config into a plain dict."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return json.loads(text)
    import yaml

    return yaml.safe_load(text) or {}


def stage_seed(seed: int, stage: str) -> int:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _load_input(cfg: ExperimentConfig):
    if cfg.input == "synthetic":
        x = smooth_lowrank(cfg.synthetic_shape, cfg.synthetic_ranks, seed=stage_seed(cfg.seed, "synthetic"))
        return x, "synthetic"
    paths = [Path(p) for p in cfg.input.split(",")]
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise FileNotFoundError(f"input not found: {', '.join(missing)}")
    if all(p.suffix.lower() in IMAGE_SUFFIXES for p in paths):
        return ingest_image_stack(paths, cfg.layout), paths[0].stem
    if len(paths) != 1:
        raise ValueError("several inputs are only supported for image stacks")
    return read_tensor(paths[0]), paths[0].stem


def _solver_config(cfg: ExperimentConfig, order: int) -> SolverConfig:
    reg = GntctvSpec(order, modes=cfg.gradient_modes, penalty=PenaltySpec(cfg.penalty))
    return SolverConfig(
        reg=reg, noise_penalty=PenaltySpec(cfg.noise_penalty), noise_structure=cfg.noise_structure,
        lam=cfg.lam, lam1=cfg.lam1, lam2=cfg.lam2, alpha=cfg.alpha, rho0=cfg.rho0,
        rho_growth=cfg.rho_growth, rho_max=cfg.rho_max, tol=cfg.tol, max_iters=cfg.max_iters,
        backend=cfg.backend, rank_guess=cfg.rank_guess, rank_buffer=cfg.rank_buffer,
        oversampling=cfg.oversampling, power_iters=cfg.power_iters,
        seed=stage_seed(cfg.seed, "solver"),
    )


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _append_csv(path: Path, columns, rows):
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _write_csv(path: Path, columns, rows):
    if path.exists():
        path.unlink()
    _append_csv(path, columns, rows)


def _run_compress(cfg, x):
    sketch = SketchSpec(family=cfg.sketch, seed=stage_seed(cfg.seed, "sketch"))
    t0 = time.perf_counter()
    if cfg.ranks is not None:
        approx = compress_fixed_rank(x, FixedRankConfig(
            ranks=tuple(cfg.ranks), oversampling=cfg.oversampling,
            power_iters=cfg.power_iters, sketch=sketch))
    else:
        approx = compress_fixed_accuracy(x, FixedAccuracyConfig(
            tol=cfg.accuracy, block=cfg.block, power_iters=cfg.power_iters, sketch=sketch))
    rec = approx.reconstruct()
    seconds = time.perf_counter() - t0
    trace = [{"mode": m, "rank": approx.ranks[m]} for m in approx.info.get("order", range(x.ndim))]
    for row in trace:
        err = approx.info.get("mode_error_sq")
        if err is not None:
            row["estimated_error_sq"] = float(err[row["mode"]])
    return rec, seconds, ("mode", "rank", "estimated_error_sq"), trace


def _run_recovery(cfg, x):
    quantized = cfg.task.startswith("quantized")
    obs = observe(x, sr=cfg.sr, nr=cfg.nr, sigma=cfg.sigma, delta=cfg.delta if quantized else None,
                  seed=stage_seed(cfg.seed, "degrade"))
    scfg = _solver_config(cfg, x.ndim)
    solver = {"complete": solve_gntc, "robust": solve_gnrtc,
              "quantized-complete": solve_gnqtc, "quantized-robust": solve_gnqrtc}[cfg.task]
    out = solver(obs, scfg)
    rec, report = out[0], out[-1]
    cols = ("iteration", "primal", "dual", "rel_change", "objective", "mean_rank")
    return rec, report.seconds, cols, list(report.trace_rows())


def run_experiment(cfg: ExperimentConfig) -> int:
    """Degrade, solve or compress, score, and write the outputs. Returns an
    exit code: 0 on success, 2 for a missing input, 1 for any other failure."""
    try:
        cfg.validate()
        if cfg.task == "bench":
            return _run_bench(cfg)
        x, dataset = _load_input(cfg)
    except FileNotFoundError as exc:
        print(f"tenrec: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"tenrec: {exc}", file=sys.stderr)
        return 1
    try:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.task == "compress":
            rec, seconds, cols, trace = _run_compress(cfg, x)
        else:
            rec, seconds, cols, trace = _run_recovery(cfg, x)
        write_tensor(rec, out / "recovered.tnsr")
        rep = evaluate(rec, x, seconds)
        row = {
            "task": cfg.task, "dataset": dataset, "SR": cfg.sr, "NR": cfg.nr, "sigma": cfg.sigma,
            "delta": cfg.delta, "backend": cfg.backend, "mpsnr": rep.mpsnr, "mssim": rep.mssim,
            "mrse": rep.mrse, "seconds": rep.seconds, "seed": cfg.seed,
        }
        if cfg.task == "compress":
            row.update(SR=None, NR=None, sigma=None, delta=None, backend=cfg.sketch)
        _append_csv(out / "results.csv", RESULT_COLUMNS, [row])
        _write_csv(out / "trace.csv", cols, trace)
        log.info("%s on %s: mpsnr %.2f dB, rse %.3e", cfg.task, dataset, rep.mpsnr, rep.mrse)
    except Exception as exc:  # noqa: BLE001
        print(f"tenrec: {cfg.task} failed: {exc}", file=sys.stderr)
        return 1
    return 0


def _bench_child(d: dict) -> int:
    return run_experiment(ExperimentConfig.from_dict(d))


def _run_bench(cfg: ExperimentConfig) -> int:
    """Each entry of ``experiments`` overrides fields of the bench config and
    writes into its own subdirectory of ``output_dir``."""
    base = dataclasses.asdict(cfg)
    base.pop("experiments")
    base.pop("workers")
    children = []
    for i, over in enumerate(cfg.experiments):
        d = dict(base, **over)
        d["output_dir"] = str(Path(cfg.output_dir) / over.get("name", f"exp{i:03d}"))
        d.pop("name", None)
        if d["task"] == "bench":
            raise ValueError("bench entries cannot themselves be benches")
        children.append(d)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            codes = list(pool.map(_bench_child, children))
    else:
        codes = [_bench_child(d) for d in children]
    return max(codes, default=0)


def _parse_list(text: str):
    return [int(v) for v in text.split(",") if v]


def _flag_type(f: dataclasses.Field):
    if f.name in ("experiments",):
        return json.loads
    if f.name in ("synthetic_shape", "synthetic_ranks", "ranks", "gradient_modes"):
        return _parse_list
    ann = str(f.type)
    if ann.startswith("int"):
        return int
    if ann.startswith("float"):
        return float
    return str


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tenrec", description="Tensor compression and recovery experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="YAML or JSON experiment config")
    p.add_argument("-v", "--verbose", action="store_true")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "task":
            continue
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=_flag_type(f), default=None)
    return p


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(int(n))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    d = {}
    if args.config:
        try:
            d = load_config(args.config)
        except FileNotFoundError:
            print(f"tenrec: config not found: {args.config}", file=sys.stderr)
            return 2
    for f in dataclasses.fields(ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            d[f.name] = val
    d["task"] = COMMANDS[args.command]
    try:
        cfg = ExperimentConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        print(f"tenrec: {exc}", file=sys.stderr)
        return 1
    limiter = _limit_threads()
    try:
        return run_experiment(cfg)
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
