"""Allow running as python -m molscale."""

import sys

from molscale.main import main

if __name__ == "__main__":
    sys.exit(main())
