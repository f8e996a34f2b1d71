from pyqebd.core.api import Api
from pyqebd.core.design import (
    StackedDesign,
    expand_markov,
    expand_qebd,
    expand_qelr_ci,
    expand_qelr_linear,
)
from pyqebd.core.errors import (
    CompatibilityError,
    ConfigError,
    DimensionError,
    DomainError,
    EnumerationLimitError,
    PanelFileError,
    QebdError,
    QicUnavailableError,
    RankDeficiencyError,
    SingularCovarianceError,
)
from pyqebd.core.exact import (
    MleFit,
    c_matrix,
    exact_sampler,
    expected_estimating_function,
    gibbs_sampler,
    log_normalizer,
    mle_fit,
    pmf,
)
from pyqebd.core.extension import Extension
from pyqebd.core.gee import (
    GeeFit,
    estimating_function_value,
    fit_gee,
    fit_gglm,
    fit_nodewise,
    qic,
    quasi_likelihood,
    sandwich_covariance,
)
from pyqebd.core.model import (
    BinaryPanel,
    PsiVector,
    QebdParams,
    WorkingCorrelation,
    build_g_matrix,
    materialize_correlation,
    matrix_to_theta,
    theta_to_matrix,
    vec,
)
from pyqebd.core.panel_io import read_panel, write_panel
from pyqebd.core.selection import EliminationTrace, backward_eliminate
from pyqebd.models.markov import MarkovSpec
from pyqebd.models.qebd import QebdSpec
from pyqebd.models.qelr import QelrCiSpec, QelrLinearSpec
from pyqebd.sim.bench import bench_timing
from pyqebd.sim.generators import gen_markov, gen_qebd, gen_qelr
from pyqebd.sim.replication import ReplicationReport, ScenarioConfig, run_replications
from pyqebd.version import __version__

# Lowercase alias, as in ``pyqebd.api(...)``
api = Api

__all__ = (
    "Api",
    "BinaryPanel",
    "CompatibilityError",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "EliminationTrace",
    "EnumerationLimitError",
    "Extension",
    "GeeFit",
    "MarkovSpec",
    "MleFit",
    "PanelFileError",
    "PsiVector",
    "QebdError",
    "QebdParams",
    "QebdSpec",
    "QelrCiSpec",
    "QelrLinearSpec",
    "QicUnavailableError",
    "RankDeficiencyError",
    "ReplicationReport",
    "ScenarioConfig",
    "SingularCovarianceError",
    "StackedDesign",
    "WorkingCorrelation",
    "api",
    "backward_eliminate",
    "bench_timing",
    "build_g_matrix",
    "c_matrix",
    "estimating_function_value",
    "exact_sampler",
    "expand_markov",
    "expand_qebd",
    "expand_qelr_ci",
    "expand_qelr_linear",
    "expected_estimating_function",
    "fit_gee",
    "fit_gglm",
    "fit_nodewise",
    "gen_markov",
    "gen_qebd",
    "gen_qelr",
    "gibbs_sampler",
    "log_normalizer",
    "materialize_correlation",
    "matrix_to_theta",
    "mle_fit",
    "pmf",
    "qic",
    "quasi_likelihood",
    "read_panel",
    "run_replications",
    "sandwich_covariance",
    "theta_to_matrix",
    "vec",
    "write_panel",
    "__version__",
)
