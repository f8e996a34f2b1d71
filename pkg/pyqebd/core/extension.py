"""
Extension framework for pyqebd.

Lets third-party code ship interaction kernels for the QELR linear family
without modifying pyqebd itself.

An extension is any object (typically a class) exposing:

* ``name`` (str): unique name of the extension.
* ``kernels`` (dict): maps kernel names to callables ``(u_i, u_j) -> float``
  that are symmetric and nonnegative. They become available through
  `Api.kernel` next to the built-in ``equal`` and ``discrete`` kernels.

## Example

```python
from pyqebd import api, Extension
from pyqebd.core.extension import kernel_matrix


def close(u_i, u_j):
    return float(abs(u_i - u_j) <= 1)


class DistanceKernels(Extension):
    name = "distance"
    kernels = {"close": close}


qe = api(extensions=[DistanceKernels])
W = kernel_matrix([1, 2, 4], qe.kernel("close"))
```
"""

import numpy as np

from pyqebd.core.design import check_kernels


class Extension:
    """Base class for pyqebd extensions.

    Subclassing is optional; any object with the required attributes is
    accepted.
    """

    name: str = ""
    kernels: dict = {}


def kernel_matrix(u, kernel):
    """Materialize the m×m kernel matrix w_ij = kernel(u_i, u_j), zero on the diagonal.

    ``u`` is a sequence of per-node characteristics (scalars or vectors).

    ## Raises
    `CompatibilityError`: If the kernel is asymmetric or negative on ``u``.
    """
    u = list(u)
    m = len(u)
    W = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j:
                W[i, j] = kernel(u[i], u[j])
    return check_kernels(W, m)[0]
