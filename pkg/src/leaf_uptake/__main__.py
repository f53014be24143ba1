import sys

from leaf_uptake.cli import main

sys.exit(main())
