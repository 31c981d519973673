"""Edge-preserving neural signed distance fields for raw point clouds.

A small MLP is fitted to an unoriented cloud with a vanish term, an Eikonal
term and a Laplacian smoothness term that skips points whose ``|lap f|``
marks them as sharp edges. Exact gradients and Laplacians come from
second-order forward jets (:mod:`edgesdf.jets`); parameter gradients from
an adjoint sweep over the same computation.
"""
__version__ = "0.1.0"

from .config import RunConfig, load_config
from .data import PointCloud, add_noise, normalize, sample_mesh_surface
from .errors import ConfigError, DataFormatError, EdgeSDFError, NumericalError, TapeMismatchError, TrainingDiverged
from .geometry import (detect_edges, estimate_normals, extract_isosurface, laplacian_histogram, model_field,
                       model_fields)
from .jets import Jet2, JetArray, backprop, eval_jet, eval_jets
from .losses import LossWeights, select_non_edge, total_loss
from .mesh import TriMesh
from .metrics import MetricReport, chamfer, edge_chamfer, edge_pr_iou, evaluate, hausdorff, normal_angle_error
from .model import MlpConfig, MlpModel, forward, init_geometric, load_checkpoint, save_checkpoint
from .train import TrainConfig, train
