__version__ = "0.4.0"
__author__ = "opinionflow developers"
__email__ = "opinionflow@users.noreply.github.com"
