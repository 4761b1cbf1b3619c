"""Hot-path kernels with a compiled core and a pure fallback.

The compiled extension (`_ckernels`, built from Cython at install time)
is preferred; if it is missing the numpy/pure-Python twin is used.  Set
ESTATEWATCH_PURE=1 to force the fallback — the benchmark and the
kernel-equivalence tests rely on that switch.
"""

import os

from . import pykernels

_impl = pykernels
if os.environ.get("ESTATEWATCH_PURE") != "1":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND = "pure-python" if _impl is pykernels else "compiled"

fnv1a64 = _impl.fnv1a64
ngram_hash_counts = _impl.ngram_hash_counts
batch_logits = _impl.batch_logits
