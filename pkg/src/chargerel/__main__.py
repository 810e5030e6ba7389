import sys

from chargerel.cli import main

sys.exit(main())
