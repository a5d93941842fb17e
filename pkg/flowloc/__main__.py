import sys

from flowloc.cli import main

sys.exit(main())
