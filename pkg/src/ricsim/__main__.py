import sys

from ricsim.cli import main

sys.exit(main())
