import sys

from arionet.cliapp import main

sys.exit(main())
