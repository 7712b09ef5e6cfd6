"""Density of states and its low-energy edge."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..series import Histogram


def _scope_values(se, scope) -> np.ndarray:
    """(R, n) energies of one sector or of the whole spectrum."""
    if scope == "whole":
        return np.sort(se.eigenvalues, axis=1)
    q = int(scope)
    if not 0 <= q < se.n_sectors:
        raise ValueError(f"sector {q} out of range")
    return se.sector(q)


def density_of_states(se, bins: int = 64, scope="whole", shift_to_ground: bool = True,
                      range_=None) -> Histogram:
    """Histogram of energies pooled over realizations.

    With ``shift_to_ground`` each realization's lowest energy in the chosen
    scope is subtracted first, so E = 0 is the ground state.
    """
    if bins < 10:
        raise ValueError("bins must be >= 10")
    e = _scope_values(se, scope)
    if shift_to_ground:
        e = e - e[:, :1]
    counts, edges = np.histogram(e.ravel(), bins=bins, range=range_)
    return Histogram(edges, counts, f"dos[{scope}]")


@dataclass(frozen=True)
class EdgeFit:
    alpha: float
    std_error: float
    points: int
    e_max: float


def edge_exponent(se, scope="whole", fraction: float = 0.1) -> EdgeFit:
    """Fit rho(E) ~ E^alpha near the ground state.

    Energies are shifted so each realization's ground state sits at 0; that
    level is then dropped, since the shift pins it there. The mean number of
    remaining levels below E grows like E^(alpha + 1), and this is fitted on
    log-log axes over the lowest ``fraction`` of the pooled levels. Working
    with the cumulative count avoids any binning choice.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    e = _scope_values(se, scope)
    pooled = np.sort((e[:, 1:] - e[:, :1]).ravel())
    pooled = pooled[pooled > 0]
    n = int(round(fraction * pooled.size))
    if n < 8:
        raise ValueError("not enough levels for the fit")
    x = np.log(pooled[:n])
    y = np.log(np.arange(1, n + 1) / se.n_realizations)
    (slope, icpt), *_ = np.linalg.lstsq(np.vstack([x, np.ones_like(x)]).T, y, rcond=None)
    resid = y - (slope * x + icpt)
    err = float(np.sqrt(resid.var(ddof=2) / np.sum((x - x.mean()) ** 2)))
    return EdgeFit(float(slope - 1.0), err, n, float(pooled[n - 1]))
