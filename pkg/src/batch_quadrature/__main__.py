"""Run the benchmark CLI via ``python -m batch_quadrature``."""

import sys

from batch_quadrature.cli import main

sys.exit(main())
