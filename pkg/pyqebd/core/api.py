"""
The point of entry to pyqebd.
"""

from pyqebd.core.errors import DimensionError
from pyqebd.core.exact import make_rng, mle_fit
from pyqebd.core.extension import kernel_matrix
from pyqebd.core.gee import fit_gee, fit_gglm
from pyqebd.core.model import INDEPENDENCE, ModelSpec, n_pairs
from pyqebd.core.selection import backward_eliminate
from pyqebd.models.mapper import FAMILY_MAPPER, KERNEL_MAPPER
from pyqebd.models.markov import MarkovSpec
from pyqebd.models.qebd import QebdSpec
from pyqebd.models.qelr import QelrCiSpec, QelrLinearSpec
from pyqebd.sim.bench import BENCH_M, bench_timing
from pyqebd.sim.replication import generate, run_replications

ESTIMATOR_CHOICES = ("gee", "gglm", "mle")


class Api:
    """The Api object holds the numerical settings shared by every fit.

    ## Parameters

    * **tol** (float, optional): Convergence tolerance on max|Δψ| (GEE) or
      max|score| (MLE), default 1e-8.
    * **max_iter** (int, optional): Iteration cap of every solver, default 100.
    * **max_workers** (int, optional): Worker threads for Monte Carlo
      replicates and selection refits, default 4.
    * **thread_pool_executor** (callable, optional): A
      `concurrent.futures.ThreadPoolExecutor` class, or any callable matching
      its `(max_workers=...)` signature and context-manager protocol.
    * **extensions** (list, optional): `Extension` classes or instances
      registering extra interaction kernels. See `pyqebd.core.extension`.

    ## Raises
    `ValueError`: For non-positive ``tol`` or ``max_workers``, ``max_iter < 1``,
    or a conflicting extension.

    ## Examples

    ```python
    import pyqebd
    qe = pyqebd.api(max_workers=8)
    fit = qe.fit(panel, "qebd", corr="exchangeable")
    fit.summary()
    ```
    """

    def __init__(
        self,
        tol=1e-8,
        max_iter=100,
        max_workers=4,
        thread_pool_executor=None,
        extensions=None,
    ):
        if tol <= 0:
            raise ValueError("tol must be positive")
        if max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if max_workers <= 0:
            raise ValueError("max_workers must be a positive integer")
        self.tol = tol
        self.max_iter = max_iter
        self.max_workers = max_workers
        self.thread_pool_executor = thread_pool_executor
        self._register_extensions(extensions or [])

    def _register_extensions(self, extensions):
        """Build the per-instance extension and kernel registries.

        Two extensions cannot share a ``name`` or register the same kernel
        name; both raise ``ValueError``. Overriding a built-in kernel from
        ``KERNEL_MAPPER`` is allowed.
        """
        self._extensions = {}
        for ext in extensions:
            name = getattr(ext, "name", None)
            if not name:
                raise ValueError("Extension {!r} is missing a 'name' attribute".format(ext))
            if name in self._extensions:
                raise ValueError(
                    "Duplicate extension for name {!r}: {!r} and {!r}".format(
                        name, self._extensions[name], ext
                    )
                )
            self._extensions[name] = ext

        kernels = dict(KERNEL_MAPPER)
        seen = {}
        for ext in self._extensions.values():
            for key, func in (getattr(ext, "kernels", None) or {}).items():
                if key in seen:
                    raise ValueError(
                        "Duplicate kernel {!r} registered by extensions "
                        "{!r} and {!r}".format(key, seen[key], ext)
                    )
                seen[key] = ext
                kernels[key] = func
        self._kernel_mapper = kernels

    @property
    def kernels(self):
        return tuple(self._kernel_mapper)

    def kernel(self, name):
        """Look up an interaction kernel by name.

        ## Raises
        `KeyError`: If no built-in or registered kernel has that name.
        """
        try:
            return self._kernel_mapper[name]
        except KeyError:
            raise KeyError(
                "Unknown kernel {!r}; available: {}".format(name, ", ".join(self.kernels))
            ) from None

    def kernels_from_characteristics(self, U, kernel="equal"):
        """(L, m, m) kernels from per-node characteristics U of shape (L, m)."""
        func = self.kernel(kernel) if isinstance(kernel, str) else kernel
        return [kernel_matrix(row, func) for row in U]

    def model(
        self,
        family,
        panel,
        X=None,
        W=None,
        covariate_names=None,
        kernel_names=None,
        interactions=True,
        order=1,
    ):
        """Build the model specification of ``family`` for ``panel``.

        ``X`` is required for the regression families and ``W`` for
        ``qelr-linear``. ``interactions=False`` keeps main effects only.
        """
        if family not in FAMILY_MAPPER:
            raise ValueError(
                "family must be one of {}, got {!r}".format(", ".join(FAMILY_MAPPER), family)
            )
        if family == "qebd":
            return QebdSpec.for_panel(panel, interactions=interactions)
        if X is None:
            raise DimensionError("the {} family needs covariates".format(family))
        if family == "markov":
            lags = None if interactions else ()
            return MarkovSpec(X, order=order, lags=lags, covariate_names=covariate_names)
        if family == "qelr-ci":
            return QelrCiSpec(X, covariate_names, interaction=interactions)
        if W is None:
            raise DimensionError("the qelr-linear family needs interaction kernels")
        if not interactions:
            return QelrCiSpec(X, covariate_names, interaction=False)
        return QelrLinearSpec(X, W, covariate_names, kernel_names)

    def _spec(self, model, panel):
        if isinstance(model, ModelSpec):
            return model
        return self.model(model, panel)

    def fit(self, panel, model, corr=INDEPENDENCE, estimator="gee", init=None):
        """Fit a model to a panel.

        ## Parameters

        * **panel** (BinaryPanel): Data.
        * **model** (ModelSpec or str): Specification, or ``"qebd"``.
        * **corr** (str or WorkingCorrelation, optional): Working correlation
          for ``estimator="gee"``.
        * **estimator** (str, optional): ``gee``, ``gglm`` or ``mle``. For the
          Markov family ``mle`` is the pooled transition likelihood.

        ## Returns
        `GeeFit`, or `MleFit` for an exact QEBD fit.
        """
        if estimator not in ESTIMATOR_CHOICES:
            raise ValueError(
                "estimator must be one of {}, got {!r}".format(
                    ", ".join(ESTIMATOR_CHOICES), estimator
                )
            )
        spec = self._spec(model, panel)
        if estimator == "mle":
            if isinstance(spec, QebdSpec):
                if len(spec.pairs) != n_pairs(spec.m):
                    raise ValueError("exact MLE fits the full QEBD only")
                return mle_fit(panel, init=init, max_iter=self.max_iter, tol=self.tol)
            if not isinstance(spec, MarkovSpec):
                raise ValueError("mle is available for the qebd and markov families only")
        design = spec.expand(panel)
        if estimator in ("gglm", "mle"):
            return fit_gglm(design, max_iter=self.max_iter, tol=self.tol, init=init)
        return fit_gee(design, corr, max_iter=self.max_iter, tol=self.tol, init=init)

    def select(self, panel, model, protect=None, warm_start=True):
        """QIC backward elimination; see `backward_eliminate`."""
        return backward_eliminate(
            self._spec(model, panel),
            panel,
            protect=protect,
            max_iter=self.max_iter,
            tol=self.tol,
            warm_start=warm_start,
            thread_pool_executor=self.thread_pool_executor,
            max_workers=self.max_workers,
        )

    def simulate(self, config):
        """`Dataset` of every replicate of a scenario."""
        return [generate(config, make_rng(config.seed, stream=r)) for r in range(config.replicates)]

    def replicate(self, config):
        """Run a Monte Carlo scenario; see `run_replications`."""
        return run_replications(
            config,
            thread_pool_executor=self.thread_pool_executor,
            max_workers=self.max_workers,
            max_iter=self.max_iter,
            tol=self.tol,
        )

    def bench(self, m_list=BENCH_M, n=300, seed=0, repeats=5):
        return bench_timing(m_list, n=n, seed=seed, repeats=repeats)
