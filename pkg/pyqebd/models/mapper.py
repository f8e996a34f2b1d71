from .markov import MarkovSpec
from .qebd import QebdSpec
from .qelr import QelrCiSpec, QelrLinearSpec, discrete_kernel, equal_kernel

FAMILY_MAPPER = {
    "qebd": QebdSpec,
    "qelr-ci": QelrCiSpec,
    "qelr-linear": QelrLinearSpec,
    "markov": MarkovSpec,
}

KERNEL_MAPPER = {
    "equal": equal_kernel,
    "discrete": discrete_kernel,
}
