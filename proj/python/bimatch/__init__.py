"""Complementarities in worker-firm matching networks.

Thin Python layer over the native core. Functions that produce reports return
plain dictionaries with the same fields as the ``bimatch`` command's JSON
output.
"""

import json

from ._core import (
    BimatchError,
    Network,
    __version__,
    als,
    closed_form_beta,
    count_four_cycles,
    er_generate,
    identification_set,
    seriation,
    twfe,
)
from . import _core

__all__ = [
    "BimatchError",
    "Network",
    "__version__",
    "als",
    "closed_form_beta",
    "count_four_cycles",
    "diagnose",
    "er_generate",
    "estimate",
    "identification_set",
    "seriation",
    "simulate",
    "twfe",
]


def diagnose(net):
    """Connectivity, cycle and identification report for ``net``."""
    return json.loads(_core._diagnose(net))


def estimate(
    net,
    labeling="rank",
    *,
    seed=20240601,
    gamma=0.10,
    worker_instruments=None,
    firm_instruments=None,
    truth=None,
    include_cycles=False,
):
    """Estimate the interaction parameter from the network's disjoint 4-cycles.

    ``labeling`` is one of ``rank`` (needs both instrument mappings),
    ``random``, ``outcome`` or ``oracle`` (needs ``truth``, a pair of
    ``{key: value}`` mappings for workers and firms).
    """
    true_alpha, true_psi = truth if truth is not None else ({}, {})
    return json.loads(
        _core._estimate(
            net,
            labeling,
            seed,
            gamma,
            dict(worker_instruments or {}),
            dict(firm_instruments or {}),
            dict(true_alpha),
            dict(true_psi),
            include_cycles,
        )
    )


def simulate(sigma, cycles, p, beta0, *, gamma=0.10, reps=10000, seed=20240601, threads=1):
    return json.loads(_core._simulate(sigma, cycles, p, beta0, gamma, reps, seed, threads))
