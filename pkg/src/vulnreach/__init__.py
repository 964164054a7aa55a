"""vulnreach: reachability analysis and exploit unit-test generation for
third-party library vulnerabilities in Java client projects.
"""

__version__ = "0.1.0"

from .errors import VulnreachError

__all__ = ["VulnreachError", "__version__"]
