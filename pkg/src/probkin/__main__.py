import sys

from probkin.cli import main

sys.exit(main())
