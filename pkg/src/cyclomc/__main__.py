import sys

from cyclomc.cli import main

sys.exit(main())
