"""Three curvature estimates on the same triangle mesh.

Trains a network on a bumpy sphere, then compares per-vertex mean
curvature from the discrete shape operator, the cotangent formula and the
network's level sets.

    python demos/mesh_curvature.py --epochs 200
"""

import argparse

import numpy as np
from scipy.stats import spearmanr

from neuralsdf.discrete_geom import meyer_mean_curvature, vertex_geometry
from neuralsdf.implicit_geom import probe_geometry
from neuralsdf.loss import LossWeights
from neuralsdf.sampler import BatchSpec
from neuralsdf.shapes import bumpy_sphere
from neuralsdf.train import TrainConfig, dataset_from_mesh, train


def summary(name, h):
    q = np.percentile(h, [5, 50, 95])
    print(f"{name:<10} p5 {q[0]:7.3f}  median {q[1]:7.3f}  p95 {q[2]:7.3f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--subdivisions", type=int, default=3)
    args = ap.parse_args()

    mesh = bumpy_sphere(args.subdivisions)
    data = dataset_from_mesh(mesh)
    m = min(2500, len(data.geometry))
    net, _ = train(TrainConfig(epochs=args.epochs, batch=BatchSpec(m=m),
                               weights=LossWeights.basic(w_eikonal=300.0,
                                                         w_dirichlet_off=3000.0)), data)

    discrete = vertex_geometry(mesh).mean
    meyer = meyer_mean_curvature(mesh)
    # back to mesh units: curvature scales inversely with length
    neural = probe_geometry(net, (mesh.vertices - data.center) * data.scale).mean * data.scale

    for name, h in (("discrete", discrete), ("meyer", meyer), ("neural", neural)):
        summary(name, h)
    print(f"spearman(neural, meyer)    {spearmanr(neural, meyer).statistic:.3f}")
    print(f"spearman(discrete, meyer)  {spearmanr(discrete, meyer).statistic:.3f}")


if __name__ == "__main__":
    main()
