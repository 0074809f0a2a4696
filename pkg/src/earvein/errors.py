"""Pipeline failure types. The CLI maps these to exit code 2."""


class PipelineError(Exception):
    """Base class for failures to turn an image into features."""


class SegmentationEmpty(PipelineError):
    """No candidate ear region survived thresholding and morphology."""


class VeinsNotFound(PipelineError):
    """The vein skeleton came out empty."""
