import sys

from lexswap.cli import main

sys.exit(main())
