"""Shared test helpers."""

import numpy as np

from ssmfusion.numerics import Tensor
from ssmfusion.ssm import SsmParams


def make_ssm_params(rng, width, states, requires_grad=False) -> SsmParams:
    def t(arr):
        return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=requires_grad)

    return SsmParams(
        A=t(-rng.uniform(0.5, 3.0, (width, states))),
        D=t(np.ones(width)),
        W_B=t(rng.standard_normal((width, states)) * 0.5),
        W_C=t(rng.standard_normal((width, states)) * 0.5),
        W_delta=t(rng.standard_normal((width, width)) * 0.5),
        b_delta=t(rng.standard_normal(width) * 0.1),
    )
