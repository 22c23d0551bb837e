class PenaltyLearnError(Exception):
    """Base class for every error raised by penaltylearn"""

    exit_code: int = 2


class UserInputError(PenaltyLearnError):
    """Bad data, bad configuration or a violated precondition"""

    exit_code = 1


class FormatError(UserInputError):
    pass


class ValidationError(UserInputError):
    pass


class ConfigError(UserInputError):
    pass


class DomainError(UserInputError):
    pass


class TrainingError(PenaltyLearnError):
    def __init__(self, msg: str, iteration: int):
        super().__init__(f"{msg} (iteration {iteration})")
        self.iteration = iteration


class PipelineError(PenaltyLearnError):
    pass


class MetricError(PenaltyLearnError):
    pass


class UnknownSequenceError(ValidationError):
    pass


class LabelRangeError(ValidationError):
    pass


class OverlappingLabelsError(ValidationError):
    pass
