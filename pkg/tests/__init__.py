import os
import unittest

# full-size runs take minutes; opt in with SPARSEPM_SLOW_TESTS=1
slow = unittest.skipUnless(os.environ.get("SPARSEPM_SLOW_TESTS"), "set SPARSEPM_SLOW_TESTS=1 to run")
