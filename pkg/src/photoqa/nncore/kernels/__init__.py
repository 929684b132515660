"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set PHOTOQA_PURE_PY=1 to force the numpy backend regardless of what was
built. The active backend name is exposed as BACKEND.
"""

import os

if os.environ.get("PHOTOQA_PURE_PY"):
    from . import lstm_py as _impl
else:
    try:
        from . import _lstm_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import lstm_py as _impl

BACKEND: str = _impl.BACKEND_NAME
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
lstm_forward_batch = _impl.lstm_forward_batch
lstm_backward_batch = _impl.lstm_backward_batch
