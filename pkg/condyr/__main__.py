"""Entry point for python -m condyr."""

import sys

from condyr.cli import main

sys.exit(main())
