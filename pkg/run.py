import sys

from dcopt.cli import main

sys.exit(main())
