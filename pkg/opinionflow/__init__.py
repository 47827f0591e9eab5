from .pckg_info import *
