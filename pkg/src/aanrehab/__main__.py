"""Module entry point: python -m aanrehab ..."""
import sys

from .cli import main

sys.exit(main())
