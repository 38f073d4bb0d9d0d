import sys

from trustdyn.cli import main

sys.exit(main())
