"""Entry point for ``python -m kernel_estimation``."""

import sys

from kernel_estimation.main import main

sys.exit(main())
