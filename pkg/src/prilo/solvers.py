"""Phase retrieval solvers: Fienup ER/HIO, latent-space DPR and PRILO.

PRILO first optimises the latent ``z_0``, then for each scheduled layer ``i``
runs three projected-gradient stages:

A. forward optimisation of ``z_i`` inside an l1-ball around its current value,
B. back-projection of the optimised ``z_i`` to a latent in a ball around 0,
C. refinement of that latent inside a ball around the back-projected point.
"""
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core_math import Shape2D, dft2, derive_seed, idft2
from .errors import ConfigError, RestartError, ShapeError
from .measurement import Fourier2D, magnitude_loss, magnitude_loss_and_grad
from .metrics import psnr
from .projection import L1Ball, NoiseSchedule, PgdSettings, pgd, project_l1

INF = math.inf


@dataclass
class ReconstructionResult:
    image: np.ndarray
    magnitude_loss: float
    z0_final: np.ndarray = None
    restart_index: int = 0
    loss_trace: list = None
    psnr_trace: list = None
    wall_ms: float = 0.0
    restart_losses: list = field(default_factory=list)
    stage_losses: list = field(default_factory=list)


# --- classical baselines ------------------------------------------------------


def _fourier_substitute(x, y, shape):
    """Real part of ``idft2(y * exp(i arg dft2(x)))``; phase 1 where ``|dft2(x)| == 0``."""
    c = dft2(x, shape)
    mag = np.abs(c)
    phase = np.ones_like(c)
    nz = mag > 0
    phase[nz] = c[nz] / mag[nz]
    return idft2(y * phase, shape).real


def _check_fourier_y(y, shape):
    shape = Shape2D.parse(shape)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (shape.size,):
        raise ShapeError(f"{y.shape} magnitudes do not match image shape {shape}")
    return y, shape


def _image_constraint(x, support):
    out = np.clip(x, 0.0, 1.0)
    if support is not None:
        out[~support] = 0.0
    return out


def er(y, shape, iters, x0, support=None, trace=False, reference=None):
    """Fienup error reduction with a [0, 1] pixel constraint (and optional support)."""
    y, shape = _check_fourier_y(y, shape)
    op = Fourier2D(shape)
    support = None if support is None else np.asarray(support, dtype=bool).ravel()
    start = time.perf_counter()
    x = _image_constraint(np.asarray(x0, dtype=np.float64), support)
    losses, psnrs = [], []
    for _ in range(iters):
        x = _image_constraint(_fourier_substitute(x, y, shape), support)
        if trace:
            losses.append(magnitude_loss(op, x, y))
            if reference is not None:
                psnrs.append(psnr(x, reference))
    return ReconstructionResult(
        image=x,
        magnitude_loss=magnitude_loss(op, x, y),
        loss_trace=losses if trace else None,
        psnr_trace=psnrs if trace and reference is not None else None,
        wall_ms=1e3 * (time.perf_counter() - start),
    )


def hio(y, shape, iters, x0, beta=0.9, support=None, trace=False, reference=None,
        feedback="projection"):
    """Fienup hybrid input-output.

    With ``x'`` the magnitude-substituted iterate, pixels whose ``x'`` meets
    the image constraint (inside [0, 1] and inside ``support``) take it; the
    others are pushed back by ``x - beta * (x' - P(x'))``, where ``P`` is the
    projection onto the constraint.  For negative pixels and pixels outside
    the support ``P(x') = 0`` and this is the classical ``x - beta * x'``.
    ``feedback="literal"`` applies ``x - beta * x'`` to every violating pixel,
    including those above 1 (which then get pushed towards 0, not 1).

    Every iterate is scored after applying the constraint and the best one is
    returned.
    """
    if feedback not in ("projection", "literal"):
        raise ValueError(f"unknown HIO feedback {feedback!r}")
    y, shape = _check_fourier_y(y, shape)
    op = Fourier2D(shape)
    support = None if support is None else np.asarray(support, dtype=bool).ravel()
    start = time.perf_counter()
    x = np.asarray(x0, dtype=np.float64).copy()
    best = _image_constraint(x, support)
    best_loss = magnitude_loss(op, best, y)
    losses, psnrs = [], []
    for _ in range(iters):
        xp = _fourier_substitute(x, y, shape)
        target = _image_constraint(xp, support)
        ok = target == xp
        push = xp if feedback == "literal" else xp - target
        x = np.where(ok, xp, x - beta * push)
        cand = _image_constraint(x, support)
        loss = magnitude_loss(op, cand, y)
        losses.append(loss)
        if trace and reference is not None:
            psnrs.append(psnr(cand, reference))
        if loss < best_loss:
            best, best_loss = cand, loss
    return ReconstructionResult(
        image=best,
        magnitude_loss=best_loss,
        loss_trace=losses if trace else None,
        psnr_trace=psnrs if trace and reference is not None else None,
        wall_ms=1e3 * (time.perf_counter() - start),
    )


# --- generator-based solvers --------------------------------------------------


class MagnitudeObjective:
    """``z -> || |A G_{i+1}^k(z)| - y ||^2 / gain`` with gradient by VJP.

    ``first_layer`` is ``i + 1``; ``first_layer=1`` optimises the latent.
    Dividing by the operator gain keeps step sizes comparable across operators.
    """

    def __init__(self, op, y, net, first_layer=1):
        self.op, self.y, self.net = op, np.asarray(y, dtype=np.float64), net
        self.first = first_layer
        self.scale = 1.0 / op.gain

    def image(self, z):
        return self.net.forward_sub(self.first, self.net.depth, z)[0]

    def __call__(self, z):
        out, tr = self.net.forward_sub(self.first, self.net.depth, z)
        loss, g = magnitude_loss_and_grad(self.op, out, self.y)
        return loss * self.scale, self.net.vjp_sub(self.first, self.net.depth, tr, g * self.scale)


class BackProjectionObjective:
    """``z -> ||G_1^i(z) - target||^2``."""

    def __init__(self, net, layer, target):
        self.net, self.layer, self.target = net, layer, np.asarray(target, dtype=np.float64)

    def __call__(self, z):
        out, tr = self.net.forward_sub(1, self.layer, z)
        r = out - self.target
        return float(r @ r), self.net.vjp_sub(1, self.layer, tr, 2.0 * r)


class _Recorder:
    """Collects per-iteration magnitude loss and PSNR when tracing is on."""

    def __init__(self, op, y, reference):
        self.op, self.y, self.reference = op, y, reference
        self.losses, self.psnrs = [], []

    def hook(self, image_fn, monitor=None, stage=None, ball=None):
        def on_iterate(k, x, loss):
            if monitor is not None:
                monitor(stage, ball, x)
            if self.losses is not None:
                img = image_fn(x)
                self.losses.append(magnitude_loss(self.op, img, self.y))
                if self.reference is not None:
                    self.psnrs.append(psnr(img, self.reference))
        return on_iterate


def dpr_solve(op, y, net, z0_init, settings, radius=INF, reference=None, trace=False):
    """Latent-only baseline: minimise ``|| |A G(z)| - y ||^2`` by (projected) GD.

    The ball is centred on ``z0_init``; the default radius leaves it unbounded.
    """
    z0_init = np.asarray(z0_init, dtype=np.float64)
    if z0_init.shape != (net.latent_dim,):
        raise ShapeError(f"latent of shape {z0_init.shape}, net expects {net.latent_dim}")
    start = time.perf_counter()
    obj = MagnitudeObjective(op, y, net)
    ball = L1Ball(z0_init, radius)
    rec = _Recorder(op, y, reference)
    if not trace:
        rec.losses = None
    res = pgd(obj, project_l1(z0_init, ball), ball, settings,
              on_iterate=rec.hook(net) if trace else None)
    image = net(res.x)
    return ReconstructionResult(
        image=image,
        magnitude_loss=magnitude_loss(op, image, y),
        z0_final=res.x,
        loss_trace=rec.losses if trace else None,
        psnr_trace=rec.psnrs if trace and reference is not None else None,
        wall_ms=1e3 * (time.perf_counter() - start),
    )


@dataclass
class PriloPhase:
    """One scheduled layer: ``repetitions`` rounds of steps A, B and C.

    ``stepB_radius`` and ``stepC_radius`` left as ``None`` take the
    ``init_radius`` of the enclosing :class:`PriloConfig`.
    """

    target_layer: int
    repetitions: int = 1
    stepA_steps: int = 150
    stepA_radius: float = 50.0
    stepB_steps: int = 100
    stepB_radius: float = None
    stepC_steps: int = 100
    stepC_radius: float = None

    def __post_init__(self):
        if self.target_layer < 1 or self.repetitions < 1:
            raise ConfigError(f"invalid phase {self}")
        for r in (self.stepA_radius, self.stepB_radius, self.stepC_radius):
            if r is not None and not r > 0:
                raise ConfigError(f"phase radii must be positive: {self}")
        if min(self.stepA_steps, self.stepB_steps, self.stepC_steps) < 0:
            raise ConfigError(f"phase step counts must be non-negative: {self}")

    @property
    def iterations(self):
        return self.repetitions * (self.stepA_steps + self.stepB_steps + self.stepC_steps)


@dataclass
class PriloConfig:
    init_steps: int = 150
    init_radius: float = 100.0
    phases: list = field(default_factory=list)
    latent_step: float = 0.1
    intermediate_step: float = 0.01
    backproj_step: float = 0.01
    noise: NoiseSchedule = field(default_factory=NoiseSchedule)
    noise_init: bool = True
    noise_a: bool = True
    noise_b: bool = True
    noise_c: bool = True
    use_step_b: bool = True
    use_step_c: bool = True
    seed: int = 0

    def __post_init__(self):
        self.phases = [p if isinstance(p, PriloPhase) else PriloPhase(**p) for p in self.phases]
        layers = [p.target_layer for p in self.phases]
        if layers != sorted(layers):
            raise ConfigError(f"phases must be ordered by layer (left to right), got {layers}")
        if not self.init_radius > 0 or self.init_steps < 0:
            raise ConfigError("init_radius must be positive and init_steps non-negative")
        if self.use_step_c and not self.use_step_b:
            raise ConfigError("step C needs the back-projected latent of step B")
        self.phases = [
            replace(p,
                    stepB_radius=self.init_radius if p.stepB_radius is None else p.stepB_radius,
                    stepC_radius=self.init_radius if p.stepC_radius is None else p.stepC_radius)
            for p in self.phases
        ]

    def validate_for(self, net):
        for p in self.phases:
            if p.target_layer >= net.depth:
                raise ConfigError(
                    f"phase on layer {p.target_layer} leaves no downstream layer in a "
                    f"{net.depth}-layer generator"
                )

    @property
    def iterations(self):
        return self.init_steps + sum(p.iterations for p in self.phases)

    def ablation(self, mode):
        """Variant for the ablation modes ``full``, ``ab``, ``a`` or ``init``."""
        if mode == "full":
            return replace(self)
        if mode == "ab":
            return replace(self, use_step_c=False)
        if mode == "a":
            return replace(self, use_step_b=False, use_step_c=False)
        if mode == "init":
            return replace(self, phases=[])
        raise ConfigError(f"unknown ablation mode {mode!r}")


def _settings(config, steps, step_size, enabled, seed):
    noise = replace(config.noise, enabled=config.noise.enabled and enabled)
    return PgdSettings(steps=steps, step_size=step_size, noise=noise, seed=seed)


def prilo_solve(op, y, net, z0_init, config, reference=None, trace=False, monitor=None):
    """Reconstruct ``x = G(z_0)`` with intermediate layer optimisation.

    ``monitor(stage, ball, x)`` is called for every PGD iterate (stage is one
    of ``"init"``, ``"A"``, ``"B"``, ``"C"``) and is meant for feasibility
    audits.  The returned image is the lowest-magnitude-loss output seen
    across the pipeline (after the initial optimisation and after every
    completed round); with ``use_step_b`` off the outputs are images of the
    optimised intermediate representation itself.
    """
    config.validate_for(net)
    z0_init = np.asarray(z0_init, dtype=np.float64)
    if z0_init.shape != (net.latent_dim,):
        raise ShapeError(f"latent of shape {z0_init.shape}, net expects {net.latent_dim}")
    y = np.asarray(y, dtype=np.float64)
    start = time.perf_counter()
    k = net.depth
    rec = _Recorder(op, y, reference)
    if not trace:
        rec.losses = None
    want_hooks = trace or monitor is not None

    latent_obj = MagnitudeObjective(op, y, net)

    def run(obj, x0, ball, settings, stage, image_fn):
        hook = rec.hook(image_fn, monitor, stage, ball) if want_hooks else None
        if monitor is not None:
            monitor(stage, ball, x0)
        return pgd(obj, x0, ball, settings, on_iterate=hook)

    # initial optimisation of z_0
    ball = L1Ball(z0_init, config.init_radius)
    res = run(latent_obj, project_l1(z0_init, ball), ball,
              _settings(config, config.init_steps, config.latent_step, config.noise_init,
                        config.seed),
              "init", net)
    z0 = res.x
    best_image = net(z0)
    best_loss = magnitude_loss(op, best_image, y)
    best_z0 = z0
    stage_losses = [("init", best_loss)]

    # intermediate state when back-projection is skipped: (layer, z_layer)
    inter = None
    for p_idx, phase in enumerate(config.phases):
        i = phase.target_layer
        obj_a = MagnitudeObjective(op, y, net, first_layer=i + 1)
        for rep in range(phase.repetitions):
            if inter is None:
                z_i = net.forward_sub(1, i, z0)[0]
            elif inter[0] < i:
                z_i = net.forward_sub(inter[0] + 1, i, inter[1])[0]
            else:
                z_i = inter[1]

            # A: forward optimisation of z_i around its current value
            ball_a = L1Ball(z_i, phase.stepA_radius)
            res_a = run(obj_a, z_i, ball_a,
                        _settings(config, phase.stepA_steps, config.intermediate_step,
                                  config.noise_a, derive_seed(config.seed, p_idx, rep, 1)),
                        "A", obj_a.image)
            z_i_star = res_a.x
            if not config.use_step_b:
                inter = (i, z_i_star)
                image = obj_a.image(z_i_star)
                _keep = ("A", image, None)
            else:
                # B: back-projection into a ball around 0
                ball_b = L1Ball(np.zeros(net.latent_dim), phase.stepB_radius)
                res_b = run(BackProjectionObjective(net, i, z_i_star), project_l1(z0, ball_b),
                            ball_b,
                            _settings(config, phase.stepB_steps, config.backproj_step,
                                      config.noise_b, derive_seed(config.seed, p_idx, rep, 2)),
                            "B", net)
                z0 = res_b.x
                _keep = ("B", None, z0)
                if config.use_step_c:
                    # C: refinement around the back-projected latent
                    ball_c = L1Ball(z0, phase.stepC_radius)
                    res_c = run(latent_obj, z0, ball_c,
                                _settings(config, phase.stepC_steps, config.latent_step,
                                          config.noise_c,
                                          derive_seed(config.seed, p_idx, rep, 3)),
                                "C", net)
                    z0 = res_c.x
                    _keep = ("C", None, z0)
                image = net(z0)
            loss = magnitude_loss(op, image, y)
            stage_losses.append((_keep[0], loss))
            if loss < best_loss:
                best_loss, best_image = loss, image
                if _keep[2] is not None:
                    best_z0 = _keep[2]

    return ReconstructionResult(
        image=best_image,
        magnitude_loss=best_loss,
        z0_final=best_z0,
        loss_trace=rec.losses if trace else None,
        psnr_trace=rec.psnrs if trace and reference is not None else None,
        wall_ms=1e3 * (time.perf_counter() - start),
        stage_losses=stage_losses,
    )


def run_with_restarts(solver_call, restarts, seed):
    """Run ``solver_call(restart_index, restart_seed)`` several times; keep the best.

    Restart seeds are derived from ``seed`` and the restart index.  The result
    with the lowest magnitude loss wins (lowest index on ties).  Restarts that
    raise are skipped unless all of them fail.
    """
    if restarts < 1:
        raise ValueError(f"need at least one restart, got {restarts}")
    best, losses, errors = None, [], []
    for r in range(restarts):
        try:
            res = solver_call(r, derive_seed(seed, r))
        except Exception as exc:  # noqa: BLE001 - recorded and re-raised in aggregate
            errors.append(exc)
            losses.append(math.nan)
            continue
        losses.append(res.magnitude_loss)
        if best is None or res.magnitude_loss < best.magnitude_loss:
            best = res
            best.restart_index = r
    if best is None:
        raise RestartError(f"all {restarts} restarts failed: {errors[0]!r}", errors)
    best.restart_losses = losses
    return best
