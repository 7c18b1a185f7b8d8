""" Module for the suboptimality of the empirical optimal policy """
from ..metric_types import sweep_metric
from ..plugin import fit_plugin
from ..uniform_ope import empirical_optimal, learning_suboptimality


@sweep_metric(
    name='suboptimality',
    dependencies=[fit_plugin, empirical_optimal, learning_suboptimality]
)
def suboptimality(truth, model, **kwargs):
    """ ||V*_1 - V^pi_hat*_1||_inf on the true MDP. """
    pi_hat, _ = empirical_optimal(model)
    return {'value': float(learning_suboptimality(truth, pi_hat).max())}
