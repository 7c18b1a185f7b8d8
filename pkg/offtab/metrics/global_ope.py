""" Module for the global-class uniform OPE error metric """
from ..metric_types import sweep_metric
from ..plugin import fit_plugin
from ..uniform_ope import global_class_spec, global_uniform_error, DEFAULT_CAP


@sweep_metric(
    name='global_ope',
    dependencies=[fit_plugin, global_uniform_error]
)
def global_ope(truth, model, rng, global_mode='auto', global_samples=200,
               enumeration_cap=DEFAULT_CAP, **kwargs):
    """Uniform OPE error over the deterministic non-stationary policies.

    Args:
        truth (TabularMDP): The data-generating MDP. Required.
        model (EmpiricalModel): The plug-in model fitted on this replicate. Required.
        rng (RngStream): The metric stream, used by the sampled mode. Required.
        global_mode (str): 'auto', 'exhaustive' or 'sampled'.
        global_samples (int): M for the sampled mode.
        enumeration_cap (int): The largest class enumerated exhaustively.

    Returns:
        A dict consisting of:
            value (float): sup ||Q_hat^pi_1 - Q^pi_1||_inf over the examined policies.
            flag (str): 'exhaustive' or 'lower_bound' when the class was sampled.
    """
    spec = global_class_spec(global_mode, truth.S, truth.A, truth.H,
                             samples=global_samples, cap=enumeration_cap)
    report = global_uniform_error(truth, model, spec, rng=rng)
    flag = 'lower_bound' if 'lower_bound' in report.mode_flags else 'exhaustive'
    return {'value': report.sup_error, 'flag': flag}
