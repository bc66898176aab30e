import sys

from torselab.cli import main

sys.exit(main())
