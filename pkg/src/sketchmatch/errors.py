"""Exception hierarchy shared across the package."""


class SketchMatchError(Exception):
    pass


class DimensionError(SketchMatchError, ValueError):
    """Operand shapes do not conform."""


class GeometryError(SketchMatchError, ValueError):
    """Spatial sizes or patch layout are invalid."""


class ContractError(SketchMatchError, ValueError):
    """An input violates a documented precondition of an operation."""


class DegenerateEmbeddingError(SketchMatchError, ValueError):
    pass


class TrainingStateError(SketchMatchError, RuntimeError):
    pass


class MiningError(SketchMatchError, ValueError):
    pass


class IntegrityError(SketchMatchError, ValueError):
    """A weight archive is corrupt; ``offset`` is the byte where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class StructuralError(SketchMatchError, ValueError):
    pass


class TransferError(SketchMatchError, ValueError):
    pass


class IngestionError(SketchMatchError, ValueError):
    pass


class ConfigError(SketchMatchError, ValueError):
    pass
