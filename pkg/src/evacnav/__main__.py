import sys

from evacnav.cli import main

sys.exit(main())
