"""Neural signed distance functions with curvature-aware training.

Sine networks with closed-form input derivatives, differential geometry of
implicit and triangulated surfaces, curvature-biased minibatch sampling,
an ADAM trainer, a sphere tracer, an RBF baseline and evaluation tools.
"""

from .discrete_geom import TriMesh, load_obj, meyer_mean_curvature, save_obj, vertex_geometry
from .evaluation import MetricReport, sampling_ab_test, table1_metrics
from .geometry import VertexGeometry
from .implicit_geom import (ImplicitProbe, Plane, Sphere, Torus, curvatures, gaussian_curvature,
                            mean_curvature, probe_geometry, shape_operator)
from .loss import LossBreakdown, LossWeights, loss_param_gradient, total_loss
from .net import (SineMlp, forward, init_siren, input_gradient, input_hessian, load_checkpoint,
                  probe, save_checkpoint)
from .oracle import SdfOracle
from .rbf import RbfModel
from .render import Camera, RenderConfig, sphere_trace
from .sampler import BatchSpec, CurvatureSampler, partition_by_curvature, sample_minibatch
from .train import AdamState, TrainConfig, adam_step, dataset_from_mesh, dataset_from_surface

# ``train`` and ``render`` stay submodules; their entry points are
# ``neuralsdf.train.train`` and ``neuralsdf.render.render``.

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BatchSpec", "Camera", "CurvatureSampler", "ImplicitProbe", "LossBreakdown",
    "LossWeights", "MetricReport", "Plane", "RbfModel", "RenderConfig", "SdfOracle", "SineMlp",
    "Sphere", "Torus", "TrainConfig", "TriMesh", "VertexGeometry", "adam_step", "curvatures",
    "dataset_from_mesh", "dataset_from_surface", "forward", "gaussian_curvature", "init_siren",
    "input_gradient", "input_hessian", "load_checkpoint", "load_obj", "loss_param_gradient",
    "mean_curvature", "meyer_mean_curvature", "partition_by_curvature", "probe",
    "probe_geometry", "sample_minibatch", "sampling_ab_test", "save_checkpoint", "save_obj",
    "shape_operator", "sphere_trace", "table1_metrics", "total_loss", "vertex_geometry",
]
