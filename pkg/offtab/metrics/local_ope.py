""" Module for the local-class uniform OPE error metric """
from ..metric_types import sweep_metric
from ..plugin import fit_plugin
from ..uniform_ope import sample_local_class, local_uniform_error


@sweep_metric(
    name='local_ope',
    dependencies=[fit_plugin, sample_local_class, local_uniform_error]
)
def local_ope(truth, model, rng, eps_opt, local_samples=200, **kwargs):
    """Uniform OPE error over a verified sample of the local policy class.

    Args:
        truth (TabularMDP): The data-generating MDP. Required.
        model (EmpiricalModel): The plug-in model fitted on this replicate. Required.
        rng (RngStream): The metric stream for rejection sampling. Required.
        eps_opt (float): The local-class radius. Required.
        local_samples (int): M, the number of local policies to sample.

    Returns:
        A dict consisting of:
            value (float): the sup error over the sample (a lower bound on the class sup).
            flag (str): 'lower_bound', plus 'exhausted' when fewer than M were accepted
                and 'eps_opt_above_regime' when eps_opt > sqrt(H/S).
    """
    sample = sample_local_class(model, eps_opt, local_samples, rng)
    report = local_uniform_error(truth, model, sample.policies, eps_opt)
    flags = ['lower_bound']
    if sample.exhausted:
        flags.append('exhausted')
    if 'eps_opt_above_regime' in report.mode_flags:
        flags.append('eps_opt_above_regime')
    return {'value': report.sup_error, 'flag': ';'.join(flags)}
