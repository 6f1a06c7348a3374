import sys

from rangesim.cli import main

sys.exit(main())
