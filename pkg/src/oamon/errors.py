class OamonError(Exception):
    """Base class for data errors raised by the pipeline."""


class MalformedDoi(OamonError, ValueError):
    pass


class ParseError(OamonError, ValueError):
    pass


class ParserError(OamonError):
    """An HTML affiliation parser failed on a document."""


class InsufficientCorpus(OamonError, ValueError):
    pass


class DuplicateOrStale(OamonError, ValueError):
    pass


class UnsupportedFormat(OamonError, ValueError):
    pass


class PopulationTooSmall(OamonError, ValueError):
    pass


class MissingVerdicts(OamonError, ValueError):
    pass


class StepFailed(OamonError):
    def __init__(self, step: str, cause: BaseException):
        super().__init__(f"step {step!r} failed: {cause}")
        self.step = step
        self.cause = cause
