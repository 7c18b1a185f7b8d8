""" Module for the sandwich check between suboptimality and the global sup error """
from ..metric_types import sweep_metric
from ..mdp_core import DP_TOL
from ..plugin import fit_plugin
from ..uniform_ope import (PolicyClassSpec, global_uniform_error, empirical_optimal,
                           learning_suboptimality, DEFAULT_CAP)


@sweep_metric(
    name='sandwich',
    dependencies=[fit_plugin, global_uniform_error, empirical_optimal, learning_suboptimality]
)
def sandwich(truth, model, enumeration_cap=DEFAULT_CAP, **kwargs):
    """2 x (exhaustive global sup error) - ||V*_1 - V^pi_hat*_1||_inf.

    Non-negative whenever the empirical optimal policy is near optimal by the
    uniform convergence argument; the flag is 'violation' otherwise, or when the
    suboptimality itself is negative.
    """
    spec = PolicyClassSpec('global_exhaustive', enumeration_cap=enumeration_cap)
    sup_error = global_uniform_error(truth, model, spec).sup_error
    pi_hat, _ = empirical_optimal(model)
    gap = learning_suboptimality(truth, pi_hat)
    value = 2.0 * sup_error - float(gap.max())
    violated = value < -DP_TOL or gap.min() < -DP_TOL
    return {'value': value, 'flag': 'violation' if violated else ''}
