"""Exception hierarchy shared by all modules."""


class SmoothCurateError(Exception):
    """Base class for every error raised by this package."""


class InvalidTrajectory(SmoothCurateError, ValueError):
    pass


class InvalidRotation(SmoothCurateError, ValueError):
    pass


class SignalTooShort(SmoothCurateError, ValueError):
    pass


class EmptyInput(SmoothCurateError, ValueError):
    pass


class DomainError(SmoothCurateError, ValueError):
    pass


class RegionTooShort(SmoothCurateError, ValueError):
    pass


class SegmentTooShort(SmoothCurateError, ValueError):
    pass


class MissingScore(SmoothCurateError, KeyError):
    pass


class InvalidBudget(SmoothCurateError, ValueError):
    pass


class DegenerateDistribution(SmoothCurateError, ValueError):
    pass


class GroupTooSmall(SmoothCurateError, ValueError):
    pass


class ShapeError(SmoothCurateError, ValueError):
    pass


class CandidateShortfall(SmoothCurateError, ValueError):
    pass


class EmptyBatch(SmoothCurateError, ValueError):
    pass


class ParseError(SmoothCurateError, ValueError):
    """Malformed record in a demonstration or score file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc += ": "
        super().__init__(loc + message)


class ValidationError(SmoothCurateError, ValueError):
    """A parsed trajectory violates one of its invariants."""

    def __init__(self, traj_id, problems):
        self.traj_id = traj_id
        self.problems = list(problems)
        super().__init__(f"trajectory {traj_id!r}: " + "; ".join(self.problems))
