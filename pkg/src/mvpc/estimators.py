"""scikit-learn style wrappers around sampling and fitting.

``MVPCSampler`` turns meshes into ground-truth MVPCs (a stateless transformer);
``MVPCFitter`` deforms an initial MVPC toward a ground truth and keeps the result.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import TriangleMesh, make_rig
from .fitter import FitConfig, fit, init_mvpc
from .geoloss import LossWeights
from .metrics import chamfer, mvpc_to_points
from .sampler import normalize_mesh, sample_mvpc
from .validation import check_mesh, check_mvpc, check_view_count


class MVPCSampler(TransformerMixin, BaseEstimator):
    """Ray-cast meshes from a fixed rig.

    Parameters
    ----------
    n_views : {4, 6, 8}
    resolution : int
        Grid height and width.
    normalize : bool
        Center and scale each mesh to its unit bounding sphere first.
    """

    def __init__(self, n_views=6, resolution=128, normalize=True):
        self.n_views = n_views
        self.resolution = resolution
        self.normalize = normalize

    def fit(self, X=None, y=None):
        check_view_count(self.n_views)
        if int(self.resolution) < 2:
            raise ValueError("resolution must be at least 2")
        self.rig_ = make_rig(self.n_views, int(self.resolution))
        return self

    def _one(self, mesh):
        mesh = check_mesh(mesh)
        if self.normalize:
            mesh = normalize_mesh(mesh)
        return sample_mvpc(mesh, self.rig_)

    def transform(self, X):
        """A single mesh gives one MVPC; a sequence of meshes gives a list."""
        check_is_fitted(self, "rig_")
        if isinstance(X, TriangleMesh):
            return self._one(X)
        return [self._one(m) for m in X]


class MVPCFitter(BaseEstimator):
    """Fit free per-pixel points and visibilities to a ground-truth MVPC.

    ``fit(gt)`` starts from ``init_mvpc(gt, init_mode, sigma, seed)`` unless an
    explicit ``init`` is passed. The result is exposed as ``mvpc_`` and the
    per-iteration record as ``trace_``.
    """

    def __init__(self, alpha=100.0, beta=1.0, vis_weight=1.0, iterations=500, step_size=1e-2,
                 warmup_steps=100, optimizer="adam", schedule="constant", init_mode="noisy-gt",
                 sigma=0.05, seed=0, consistency="residual"):
        self.alpha = alpha
        self.beta = beta
        self.vis_weight = vis_weight
        self.iterations = iterations
        self.step_size = step_size
        self.warmup_steps = warmup_steps
        self.optimizer = optimizer
        self.schedule = schedule
        self.init_mode = init_mode
        self.sigma = sigma
        self.seed = seed
        self.consistency = consistency

    def get_config(self) -> FitConfig:
        return FitConfig(
            iterations=self.iterations, step_size=self.step_size,
            warmup_steps=self.warmup_steps,
            weights=LossWeights(self.alpha, self.beta, self.vis_weight),
            optimizer=self.optimizer, init_mode=self.init_mode, sigma=self.sigma,
            seed=self.seed, consistency=self.consistency, schedule=self.schedule)

    def fit(self, X, y=None, init=None, masks=None):
        gt = check_mvpc(X, "ground truth")
        config = self.get_config()
        if init is None:
            init = init_mvpc(gt, config.init_mode, config.sigma, config.seed)
        else:
            init = check_mvpc(init, "init")
        self.init_ = init
        self.trace_ = fit(init, gt, config, masks=masks)
        self.mvpc_ = self.trace_.result
        self.n_iter_ = len(self.trace_.history)
        return self

    def predict(self, X=None):
        """The fitted MVPC (the argument is accepted for API symmetry and ignored)."""
        check_is_fitted(self, "mvpc_")
        return self.mvpc_

    def score(self, X, y=None):
        """Negative Chamfer distance between the fitted and the given MVPC's visible points."""
        check_is_fitted(self, "mvpc_")
        gt = check_mvpc(X, "ground truth")
        return -chamfer(mvpc_to_points(self.mvpc_), mvpc_to_points(gt))
