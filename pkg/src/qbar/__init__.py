"""Per-creator semantic-mutation detection with a simulated variational circuit."""
from .statevector import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
