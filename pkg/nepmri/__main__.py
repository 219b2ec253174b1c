import sys

from nepmri.main import main

sys.exit(main())
