"""``python3 -m mfiq``: same as the ``mfiq`` console script."""

from __future__ import annotations

import sys

from .cli import main

sys.exit(main())
