"""Exact glucose response of the normalised Magdelaine model.

With E = 0 and the chains starting at rest, the model is linear with unit
gain Erlang-2 chains on both the insulin and the disturbance side, so

    g(t) = b * D(t) - a * X(t)

where ``X`` and ``D`` are the time integrals of x2 and x4. This module is
independent of the RK4 integrator and serves as the oracle route.
"""
from __future__ import annotations

import numpy as np

from .models import MagdelaineParams
from .signals import PulseInput, RectangularDisturbance, _erlang2_cdf, _erlang2_cdf_integral


def cumulative_insulin(t, u: PulseInput, rate: float):
    """Integral of x2 from the start to t for the bolus part of ``u``."""
    t = np.asarray(t, dtype=float)
    if u.is_impulse:
        return u.impulse_amount * _erlang2_cdf(t - u.t_on, rate)
    return u.bolus * (_erlang2_cdf_integral(t - u.t_on, rate) - _erlang2_cdf_integral(t - u.t_off, rate))


def cumulative_absorption(t, d: RectangularDisturbance, rate: float):
    t = np.asarray(t, dtype=float)
    if d.is_zero:
        return np.zeros_like(t)
    return d.magnitude * (_erlang2_cdf_integral(t - d.start, rate) - _erlang2_cdf_integral(t - d.end, rate))


def glucose(t, params: MagdelaineParams, u: PulseInput, d: RectangularDisturbance):
    """g(t) for the normalised model started at rest with g = 0."""
    return (params.b * cumulative_absorption(t, d, params.alpha5)
            - params.a * cumulative_insulin(t, u, params.alpha3))


def insulin_step_table(params: MagdelaineParams, lags):
    """``a * H(lag)`` on an array of lags, for fast pulse superposition.

    ``-bolus * (table[i - on] - table[i - off])`` is the insulin part of g for
    a pulse whose edges fall on the lattice used to build ``lags``.
    """
    return params.a * _erlang2_cdf_integral(np.asarray(lags, float), params.alpha3)


def insulin_cdf_table(params: MagdelaineParams, lags):
    return params.a * _erlang2_cdf(np.asarray(lags, float), params.alpha3)
