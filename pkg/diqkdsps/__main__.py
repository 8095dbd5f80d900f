import sys

from diqkdsps.cli import main

sys.exit(main())
