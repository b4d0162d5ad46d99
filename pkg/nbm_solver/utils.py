import logging

from .config import RunConfig
from .levelset import LevelSetField, read_levelset_grid
from .network import SurrogatePair, init_network
from .problem import ProblemSpec
from .problems import builtin_problem, problem_defaults, star_problem
from .sampling import PointCloud, UniformGrid

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s: %(message)s"


def configure_logging(verbose=False, quiet=False):
    """Route package logs to stderr: INFO with ``verbose``, WARNING otherwise."""
    level = logging.INFO if verbose and not quiet else logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    logging.getLogger("nbm_solver").setLevel(level)


def load_problem(cfg: RunConfig) -> ProblemSpec:
    if cfg.levelset_file:
        grid = read_levelset_grid(cfg.levelset_file)
        return star_problem(LevelSetField.sampled(grid, cfg.interp_mode))
    return builtin_problem(cfg.problem)


def sampling_mode(cfg: RunConfig, resolution=None):
    """Sampling of a run; ``resolution`` overrides the uniform grid size (convergence studies)."""
    sampling = cfg.sampling
    if sampling == "auto":
        default = problem_defaults(cfg.problem).sampling
        sampling = "cloud" if isinstance(default, PointCloud) else "uniform"
    if sampling == "cloud":
        return PointCloud(cfg.n_plus, cfg.n_minus, cfg.n_boundary, cfg.n_interface, cfg.voxel)
    return UniformGrid(resolution if resolution is not None else cfg.resolution)


def build_pair(cfg: RunConfig) -> SurrogatePair:
    """Both networks, with problem defaults filling unset architecture keys."""
    defaults = problem_defaults(cfg.problem)
    net_minus = init_network(
        cfg.layers_minus or defaults.layers_minus,
        cfg.activation_minus or defaults.activation_minus,
        seed=cfg.seed,
        omega0=cfg.omega0,
    )
    net_plus = init_network(
        cfg.layers_plus or defaults.layers_plus,
        cfg.activation_plus or defaults.activation_plus,
        seed=cfg.seed + 1,
        omega0=cfg.omega0,
    )
    return SurrogatePair(net_minus, net_plus)
