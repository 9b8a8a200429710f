import sys

from multiform.cli import main

sys.exit(main())
