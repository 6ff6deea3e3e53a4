import sys

from prfclf.cli import main

sys.exit(main())
