"""Experiment runners behind the command-line interface.

Every image gets its own seed, ``derive_seed(config.seed, index)``, so results
do not depend on how a batch is split across workers.  Restart ``r`` of image
``i`` then uses ``derive_seed(image_seed, r)`` for its initialisation and
optimiser noise.  Gaussian measurement matrices come from a fixed child of
the base seed and are shared by all images of a run.
"""
import csv
import datetime
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import write_manifest
from .core_math import Shape2D, derive_seed, make_rng
from .data import load_image_dir, load_mnist_idx, write_pgm
from .errors import ConfigError
from .generator import load_weights, save_weights
from .initialization import MiiSettings, mii_init, perturb, random_init
from .measurement import apply_magnitude, make_operator
from .metrics import evaluate
from .projection import PgdSettings
from .solvers import dpr_solve, er, hio, prilo_solve, run_with_restarts
from .vae import train_vae

log = logging.getLogger(__name__)

MATRIX_KEY = 0x6D617472  # child-seed key for the measurement matrix
CSV_FIELDS = [
    "image_id", "method", "init", "restarts", "seed", "magnitude_mse", "psnr_db",
    "psnr_db_registered", "ssim", "ssim_registered", "wall_ms", "error",
]
SUMMARY_FIELDS = ["psnr_db", "psnr_db_registered", "ssim", "ssim_registered", "magnitude_mse"]


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _run_info(command, started):
    return {
        "command": command,
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": started,
        "finished": _now(),
    }


def load_dataset(config):
    """``(images, shape)`` for the configured dataset."""
    if not config.dataset or not Path(config.dataset).exists():
        raise ConfigError(f"dataset not found: {config.dataset!r}")
    if config.dataset_format == "idx":
        return load_mnist_idx(config.dataset)
    shape = Shape2D.parse(config.shape)
    return load_image_dir(config.dataset, shape), shape


def image_indices(config, count):
    stop = count if config.limit is None else min(count, config.offset + config.limit)
    return list(range(min(config.offset, count), stop))


def build_operator(config, shape):
    return make_operator(config.measurement, shape, config.m,
                         seed=derive_seed(config.seed, MATRIX_KEY))


def load_generator(config):
    if config.method not in ("dpr", "prilo"):
        return None
    return load_weights(config.weights)


# --- single image ------------------------------------------------------------


def _start_latent(config, op, y, net, seed):
    if config.init == "mii":
        z = mii_init(op, y, net, MiiSettings(candidates=config.mii_candidates, seed=seed))
    else:
        z = random_init(net.latent_dim, seed)
    return perturb(z, config.init_sigma, derive_seed(seed, 1))


def solve_image(config, op, net, shape, x, image_seed, trace=False, monitor=None):
    """Reconstruct one image from ``|A x|`` with restarts; returns the best result.

    ``monitor`` is handed to :func:`prilo_solve` (feasibility audits).
    """
    y = apply_magnitude(op, x)
    reference = x if trace else None

    def call(r, seed):
        if config.method in ("er", "hio"):
            x0 = make_rng(seed).random(shape.size)
            if config.method == "er":
                res = er(y, shape, config.fienup.iters, x0, trace=trace, reference=reference)
            else:
                res = hio(y, shape, config.fienup.iters, x0, config.fienup.beta,
                          trace=trace, reference=reference, feedback=config.fienup.feedback)
            return res
        z0 = _start_latent(config, op, y, net, seed)
        if config.method == "dpr":
            noise = replace(config.prilo.noise, enabled=config.dpr.noise)
            settings = PgdSettings(steps=config.dpr.steps, step_size=config.dpr.step_size,
                                   noise=noise, seed=seed)
            return dpr_solve(op, y, net, z0, settings, radius=config.dpr.radius,
                             reference=reference, trace=trace)
        prilo = replace(config.solver_prilo(), seed=seed)
        return prilo_solve(op, y, net, z0, prilo, reference=reference, trace=trace,
                           monitor=monitor)

    res = run_with_restarts(call, config.restarts, image_seed)
    for r, loss in enumerate(res.restart_losses):
        log.info("restart %d: magnitude loss %.6g%s", r, loss,
                 " (selected)" if r == res.restart_index else "")
    return res


def magnitude_mse(op, res):
    return res.magnitude_loss / op.output_len


# --- train -------------------------------------------------------------------


def cmd_train(config):
    """Train the VAE on ``config.dataset`` and write ``decoder.prgw`` plus a manifest."""
    started = _now()
    if not config.dataset or not Path(config.dataset).exists():
        raise ConfigError(f"dataset not found: {config.dataset!r}")
    images, shape = load_dataset(config)
    images = images[image_indices(config, len(images))]
    log.info("training on %d images of %s", len(images), shape)
    decoder = train_vae(images, replace(config.train, seed=config.seed))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "decoder.prgw"
    save_weights(decoder, path)
    write_manifest(out / "train_manifest.ini", config,
                   _run_info("train", started) | {"weights": str(path)})
    log.info("wrote %s", path)
    return path


# --- solve -------------------------------------------------------------------


@dataclass
class SolveOutput:
    result: object
    report: object
    image_path: Path
    trace_path: Path = None


def cmd_solve(config, index):
    """Reconstruct image ``index``; writes a PGM (and a trace CSV when tracing)."""
    config.validate()
    images, shape = load_dataset(config)
    if not 0 <= index < len(images):
        raise ConfigError(f"image index {index} outside dataset of {len(images)}")
    op = build_operator(config, shape)
    net = load_generator(config)
    x = images[index]
    seed = derive_seed(config.seed, index)
    res = solve_image(config, op, net, shape, x, seed, trace=config.trace)
    report = evaluate(res.image, x, shape, magnitude_mse(op, res), register=config.registration)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    image_path = out / f"recon_{index:05d}.pgm"
    write_pgm(image_path, res.image, shape)
    trace_path = None
    if config.trace:
        trace_path = out / f"trace_{index:05d}.csv"
        psnrs = res.psnr_trace or [math.nan] * len(res.loss_trace)
        with open(trace_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "magnitude_loss", "psnr_db"])
            for k, (loss, p) in enumerate(zip(res.loss_trace, psnrs), start=1):
                writer.writerow([k, repr(float(loss)), repr(float(p))])
    return SolveOutput(res, report, image_path, trace_path)


# --- benchmark ---------------------------------------------------------------

_WORKER = {}


def _worker_init(config):
    images, shape = load_dataset(config)
    _WORKER.update(config=config, images=images, shape=shape,
                   op=build_operator(config, shape), net=load_generator(config))


def _benchmark_row(index, state=None):
    state = state or _WORKER
    config, shape, op = state["config"], state["shape"], state["op"]
    seed = derive_seed(config.seed, index)
    row = {"image_id": index, "method": config.method,
           "init": config.init_label if config.method in ("dpr", "prilo") else "random",
           "restarts": config.restarts, "seed": seed}
    start = time.perf_counter()
    try:
        x = state["images"][index]
        res = solve_image(config, op, state["net"], shape, x, seed)
        rep = evaluate(res.image, x, shape, magnitude_mse(op, res), register=config.registration)
        row.update(magnitude_mse=rep.magnitude_mse, psnr_db=rep.psnr_db,
                   psnr_db_registered=rep.psnr_db_registered, ssim=rep.ssim,
                   ssim_registered=rep.ssim_registered, error="")
    except Exception as exc:  # noqa: BLE001 - per-image failures go to the CSV
        log.warning("image %d failed: %r", index, exc)
        row.update({k: math.nan for k in SUMMARY_FIELDS}, error=f"{type(exc).__name__}: {exc}")
    row["wall_ms"] = 1e3 * (time.perf_counter() - start)
    return row


def summarize(rows):
    """Mean, standard error and normal 95% interval for every metric column.

    Exact reconstructions have infinite PSNR; they are counted in ``n_infinite``
    and left out of the averages.
    """
    summary = {"count": len(rows), "failed": sum(1 for r in rows if r["error"])}
    for key in SUMMARY_FIELDS:
        vals = np.array([r[key] for r in rows if not r["error"]], dtype=np.float64)
        n_inf = int(np.count_nonzero(np.isinf(vals)))
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            summary[key] = {"n": 0, "n_infinite": n_inf}
            continue
        mean = float(np.mean(vals))
        stderr = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
        summary[key] = {
            "n": int(vals.size),
            "n_infinite": n_inf,
            "mean": mean,
            "median": float(np.median(vals)),
            "stderr": stderr,
            "ci95_low": mean - 1.96 * stderr,
            "ci95_high": mean + 1.96 * stderr,
        }
    return summary


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            cells = {k: _format_cell(row[k]) for k in CSV_FIELDS}
            cells["wall_ms"] = f"{row['wall_ms']:.3f}"
            writer.writerow(cells)


def run_rows(config, indices):
    """Per-image rows in index order, fanned out over ``config.workers`` processes."""
    if config.workers == 1 or len(indices) <= 1:
        images, shape = load_dataset(config)
        state = dict(config=config, images=images, shape=shape,
                     op=build_operator(config, shape), net=load_generator(config))
        return [_benchmark_row(i, state) for i in indices]
    with ProcessPoolExecutor(max_workers=config.workers, initializer=_worker_init,
                             initargs=(config,)) as pool:
        return list(pool.map(_benchmark_row, indices))


@dataclass
class BenchmarkOutput:
    rows: list
    summary: dict
    csv_path: Path
    summary_path: Path
    manifest_path: Path


def cmd_benchmark(config):
    """Run the configured method over the image set and write CSV, summary and manifest."""
    started = _now()
    config.validate()
    images, shape = load_dataset(config)
    indices = image_indices(config, len(images))
    del images
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if config.dump_matrix and config.measurement != "fourier":
        np.save(out / "matrix.npy", build_operator(config, shape).matrix)
    log.info("benchmark: %s on %d images (%s, restarts=%d)", config.method, len(indices),
             config.measurement, config.restarts)
    rows = run_rows(config, indices)
    csv_path = out / "results.csv"
    write_csv(csv_path, rows)
    summary = summarize(rows)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    manifest_path = out / "manifest.ini"
    write_manifest(manifest_path, config, _run_info("benchmark", started),
                   images=[(i, derive_seed(config.seed, i)) for i in indices])
    return BenchmarkOutput(rows, summary, csv_path, summary_path, manifest_path)


def inspect_weights(path):
    """Human-readable description of a PRGW file."""
    net = load_weights(path)
    lines = [f"{path}: {net.depth} layers, latent {net.latent_dim}, output {net.output_dim}"]
    params = 0
    for j, layer in enumerate(net.layers, start=1):
        out_dim, in_dim = layer.weight.shape
        params += layer.weight.size + layer.bias.size
        act = layer.activation.kind
        if act == "leaky_relu":
            act += f"(alpha={layer.activation.alpha:g})"
        lines.append(f"  layer {j}: {in_dim} -> {out_dim} {act}")
    lines.append(f"  parameters: {params}")
    return "\n".join(lines)
