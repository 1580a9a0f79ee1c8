import sys

from trajset.cli import main

sys.exit(main())
