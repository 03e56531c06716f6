"""Numerical certificates for multiplier-method hypoelliptic estimates."""
import logging

from hypocert.const import DOMAIN, VERSION

_LOGGER = logging.getLogger(__name__)

__version__ = VERSION
__all__ = ["DOMAIN", "VERSION", "__version__"]
