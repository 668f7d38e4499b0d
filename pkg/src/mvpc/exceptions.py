class MvpcError(ValueError):
    """Base class for domain errors raised by this package."""


class ShapeMismatchError(MvpcError):
    pass


class EmptyInputError(MvpcError):
    pass


class FitDivergedError(MvpcError):
    def __init__(self, iteration, message="loss became non-finite"):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


class MvpcFormatError(MvpcError):
    pass


class NotAnMvpcFileError(MvpcFormatError):
    def __init__(self, message="not an MVPC file"):
        super().__init__(message)


class UnsupportedVersionError(MvpcFormatError):
    pass


class UnexpectedEOFError(MvpcFormatError):
    def __init__(self, message="unexpected end of file"):
        super().__init__(message)


class TrailingBytesError(MvpcFormatError):
    pass


class ObjParseError(MvpcError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
