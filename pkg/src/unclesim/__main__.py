import sys

from unclesim.cli import main

sys.exit(main())
