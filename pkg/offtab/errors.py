""" Module for the structured errors raised across offtab """


class OfftabError(Exception):
    """ Base class for every error raised by offtab.

        Attributes:
            message (str): a human readable description.
            exit_code (int): the process exit status used by the CLI.
    """
    exit_code = 1

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def to_dict(self):
        """ Render the error as a JSON-ready dict. """
        return {'error': type(self).__name__, 'message': self.message}


class ValidationError(OfftabError):
    """ An input violated an invariant. 'path' locates the offending entry
        (for example "P[1][0]", "probs[2][3]" or "line 4").
    """
    exit_code = 1

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path

    def to_dict(self):
        return {**super().to_dict(), 'path': self.path}


class DimensionMismatchError(ValidationError):
    """ Shapes of policy, MDP or dataset disagree. """


class EnumerationCapError(ValidationError):
    """ The exhaustive global class is larger than the enumeration cap. """

    def __init__(self, class_size, cap):
        super().__init__('cap', f"exhaustive enumeration needs {class_size} policies which "
                         f"exceeds the cap of {cap}; use the sampled mode "
                         "(kind='global_sampled') instead")
        self.class_size = class_size
        self.cap = cap


class MembershipError(ValidationError):
    """ A policy is not a member of the local class. """

    def __init__(self, policy_index, gap, eps_opt):
        super().__init__(f"policies[{policy_index}]",
                         f"value gap {gap:.6g} to the empirical optimal policy exceeds "
                         f"eps_opt={eps_opt:.6g}")
        self.policy_index = policy_index
        self.gap = gap

    def to_dict(self):
        return {**super().to_dict(), 'policy_index': self.policy_index, 'gap': self.gap}


class NotRepresentableError(ValidationError):
    """ A feature vector is not a convex combination of the anchor features. """

    def __init__(self, sa, residual):
        super().__init__(f"phi{list(sa)}" if sa is not None else 'phi',
                         f"not representable by the anchors (residual {residual:.3g})")
        self.sa = sa
        self.residual = residual


class InvariantViolation(OfftabError):
    """ An identity that must hold exactly was broken. """
    exit_code = 2


class AcceptanceError(OfftabError):
    """ An acceptance check failed. """
    exit_code = 2
