""" Module for the anchor linear MDP planning metric """
from ..metric_types import sweep_metric
from ..anchor import sample_anchors, anchor_plan


@sweep_metric(
    name='anchor',
    dependencies=[sample_anchors, anchor_plan]
)
def anchor_suboptimality(anchor_mdp, n, data_rng, **kwargs):
    """||Q*_1 - Q^pi_hat_1||_inf after N = n oracle samples per anchor.

    Args:
        anchor_mdp (AnchorLinearMDP): The anchor instance. Required.
        n (int): Samples per anchor. Required.
        data_rng (RngStream): The replicate's data stream. Required.

    Returns:
        A dict consisting of:
            value (float): the planning suboptimality on the true MDP.
    """
    model = sample_anchors(anchor_mdp, n, data_rng)
    _, report = anchor_plan(model, anchor_mdp)
    return {'value': report['suboptimality']}
