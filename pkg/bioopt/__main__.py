import sys

from bioopt.cli import main

sys.exit(main())
