""" Module for the H = 2 l1 reduction metric """
from ..metric_types import sweep_metric
from ..plugin import fit_plugin
from ..uniform_ope import lower_bound_demo, DEFAULT_CAP


@sweep_metric(
    name='lower_bound_demo',
    dependencies=[fit_plugin, lower_bound_demo]
)
def lower_bound(truth, model, enumeration_cap=DEFAULT_CAP, **kwargs):
    """Exhaustive global sup error under the (1, 0, ..., 0) last-step reward.

    Only defined for H = 2. The flag lists broken links of the reduction:
    'chain' if the sup fell below half the max l1 row error and 'binary' if it
    differs from the max binary-reward sup.
    """
    report = lower_bound_demo(truth, model, cap=enumeration_cap)
    broken = [name for name, held in (('chain', report['chain_holds']),
                                      ('binary', report['matches_binary'])) if not held]
    return {'value': report['sup_q_error'], 'flag': ';'.join(broken)}
