"""Phase retrieval with deep generative priors and intermediate layer optimisation."""
__version__ = "0.1.0"

from .core_math import Shape2D, derive_seed, dft2, gaussian_matrix, idft2, make_rng
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    FormatError,
    PriloError,
    RangeError,
    RestartError,
    ShapeError,
    TraceError,
    ValidationError,
)
from .generator import GeneratorNet, load_weights, random_net, sample_latent, save_weights
from .initialization import MiiSettings, mii_init, random_init
from .measurement import (
    Fourier2D,
    GaussianOperator,
    apply_magnitude,
    magnitude_loss,
    magnitude_loss_grad,
    make_operator,
)
from .metrics import MetricReport, evaluate, psnr, register_trivial, ssim
from .projection import L1Ball, NoiseSchedule, PgdSettings, pgd, project_l1
from .solvers import (
    PriloConfig,
    PriloPhase,
    ReconstructionResult,
    dpr_solve,
    er,
    hio,
    prilo_solve,
    run_with_restarts,
)
from .vae import VaeSpec, fit_vae, train_vae
