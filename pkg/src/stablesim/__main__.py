from stablesim.cli import main
import sys

sys.exit(main())
