"""Clone Detector - intensity-invariant copy-move forgery detection."""

__version__ = "1.0.0"
__description__ = "Block-DCT copy-move forgery detector with a FastAPI service and command-line tools"
