from .metrics import evaluate_errors
from .network import SurrogatePair, init_network, load_checkpoint, save_checkpoint
from .problems import builtin_problem
from .sampling import PointCloud, UniformGrid, sample_collocation
from .trainer import TrainConfig, train
