"""Exception types shared across the toolkit."""


class BlaposeError(Exception):
    """Base class for toolkit errors."""


class DegenerateBone(BlaposeError):
    """A bone collapsed to (near) zero length, so its direction is undefined."""

    def __init__(self, bone: int, frame: int | None = None):
        self.bone = bone
        self.frame = frame
        where = f"bone {bone}" if frame is None else f"bone {bone} at frame {frame}"
        super().__init__(f"degenerate {where}: length below threshold")


class BehindCamera(BlaposeError):
    """A point reached the camera plane or crossed behind it."""

    def __init__(self, frame: int | None = None, joint: int | None = None):
        self.frame = frame
        self.joint = joint
        loc = ""
        if frame is not None or joint is not None:
            loc = f" (frame {frame}, joint {joint})"
        super().__init__(f"point not in front of camera{loc}")


class NonPositiveResult(BlaposeError):
    """A length generator could not produce strictly positive values."""


class DimensionMismatch(BlaposeError):
    """Array shapes are inconsistent with the model or metric definition."""


class NonFiniteLoss(BlaposeError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, batch_index: int):
        self.batch_index = batch_index
        super().__init__(f"non-finite loss at batch {batch_index}")


class DegenerateConfiguration(BlaposeError):
    """A point configuration has zero variance and cannot be aligned."""


class LabelMismatch(BlaposeError):
    """Prediction and groundtruth sequences or action labels do not line up."""


class SchemaError(BlaposeError):
    """A file or configuration does not match its documented schema."""
