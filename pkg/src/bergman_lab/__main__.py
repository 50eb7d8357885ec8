import sys

from bergman_lab.main import main

sys.exit(main())
