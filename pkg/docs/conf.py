#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# opinionflow documentation build configuration file.

import os
import sys

# Put the project root first on the path so the local package's
# version is used.
cwd = os.getcwd()
project_root = os.path.dirname(cwd)
sys.path.insert(0, project_root)

import opinionflow

extensions = ["sphinx.ext.autodoc", "sphinx.ext.viewcode"]
templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = u"opinionflow"
copyright = u"2024-2025, the opinionflow developers"

version = opinionflow.pckg_info.__version__
release = opinionflow.pckg_info.__version__

exclude_patterns = ["_build"]
pygments_style = "sphinx"

html_theme = "default"
html_static_path = ["_static"]
htmlhelp_basename = "opinionflowdoc"

latex_documents = [
    ("index", "opinionflow.tex", u"opinionflow Documentation", u"the opinionflow developers", "manual"),
]

man_pages = [
    ("index", "opinionflow", u"opinionflow Documentation", [u"the opinionflow developers"], 1),
]
