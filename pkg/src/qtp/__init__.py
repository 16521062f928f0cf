"""Language-model-assisted text transmission over noisy superdense coding."""

__version__ = "0.1.0"
