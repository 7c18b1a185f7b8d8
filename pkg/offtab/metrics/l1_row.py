""" Module for the max row l1 error of the plug-in transition """
from ..metric_types import sweep_metric
from ..plugin import fit_plugin, l1_row_error


@sweep_metric(
    name='l1_row',
    dependencies=[fit_plugin, l1_row_error]
)
def l1_row(truth, model, **kwargs):
    return {'value': float(l1_row_error(model, truth).max())}
