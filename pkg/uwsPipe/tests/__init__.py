#!/usr/bin/env python
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Empty import file for tests."""
