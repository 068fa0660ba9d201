"""
Speller laboratory exceptions - every failure the pipeline can raise on purpose
"""

from typing import List, Tuple


# Exit codes used by the command-line runner
EXIT_OK = 0
EXIT_VALIDATION_ERROR = 1
EXIT_RUNTIME_ERROR = 2


class SpellerError(Exception):
    """Base class for all laboratory errors"""


class TimingRangeError(SpellerError, ValueError):
    """A time or sample index falls outside the span it must lie in"""


class SchedulingError(SpellerError):
    """A flash schedule could not be generated or violates its constraints"""


class DecoderNumericalError(SpellerError, ArithmeticError):
    """The shrunk covariance matrix could not be inverted"""


class DimensionMismatchError(SpellerError, ValueError):
    """Vectors or matrices of incompatible shape were combined"""


class EmptyInputError(SpellerError, ValueError):
    """An operation that needs at least one sample received none"""


class SelectionError(SpellerError, ValueError):
    """An object id is out of range or a selection was requested too early"""


class ParameterRangeError(SpellerError, ValueError):
    """A numeric argument lies outside its allowed range"""


class ArtifactIOError(SpellerError):
    """Reading or writing an output artifact failed"""


class ConfigValidationError(SpellerError):
    """
    Experiment configuration is invalid

    Args:
        errors: list of (field, message) pairs, one per problem found
    """

    def __init__(self, errors: List[Tuple[str, str]]):
        self.errors = list(errors)
        summary = "; ".join(f"{field}: {message}" for field, message in self.errors)
        super().__init__(f"Invalid experiment configuration ({summary})")


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the process exit code

    Args:
        error: The exception that stopped the command

    Returns:
        1 for configuration/validation problems, 2 for everything else
    """
    # pydantic is imported lazily so this module stays dependency-free
    from pydantic import ValidationError

    if isinstance(error, (ConfigValidationError, ValidationError)):
        return EXIT_VALIDATION_ERROR
    return EXIT_RUNTIME_ERROR


def describe_validation_error(error: BaseException) -> List[dict]:
    """
    Flatten a validation failure into field/message records

    Args:
        error: A ConfigValidationError or pydantic ValidationError

    Returns:
        List of {"field", "message"} dictionaries
    """
    from pydantic import ValidationError

    if isinstance(error, ConfigValidationError):
        return [{"field": field, "message": message} for field, message in error.errors]
    if isinstance(error, ValidationError):
        details = []
        for item in error.errors():
            field_path = " -> ".join(str(loc) for loc in item["loc"]) or "<root>"
            details.append({"field": field_path, "message": item["msg"]})
        return details
    return [{"field": "<root>", "message": str(error)}]
