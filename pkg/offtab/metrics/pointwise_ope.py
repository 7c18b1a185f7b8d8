""" Module for the point-wise OPE error of the empirical optimal policy """
from ..metric_types import sweep_metric
from ..plugin import fit_plugin
from ..uniform_ope import empirical_optimal, pointwise_error


@sweep_metric(
    name='pointwise_ope',
    dependencies=[fit_plugin, empirical_optimal, pointwise_error]
)
def pointwise_ope(truth, model, **kwargs):
    """ ||Q_hat^pi_1 - Q^pi_1||_inf for pi = pi_hat*, a single fixed policy. """
    pi_hat, _ = empirical_optimal(model)
    return {'value': pointwise_error(truth, model, pi_hat)}
