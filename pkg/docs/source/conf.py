# -*- coding: utf-8 -*-
#
# pysizing documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import sys, os

# -- General configuration -----------------------------------------------------

# numpy-style docstrings are read by napoleon, which ships with sphinx.
extensions = ['sphinx.ext.autodoc',
              'sphinx.ext.doctest',
              'sphinx.ext.mathjax',
              'sphinx.ext.autosummary',
              'sphinx.ext.viewcode',
              'sphinx.ext.napoleon',
              ]

# Add any paths that contain templates here, relative to this directory.
templates_path = ['_templates']

# The suffix of source filenames.
source_suffix = '.rst'

# The master toctree document.
master_doc = 'index'

# General information about the project.
project = u'PySizing'
copyright = u'2026, The PySizing Development Team'

# The version info for the project you're documenting, acts as replacement for
# |version| and |release|, also used in various other places throughout the
# built documents.
sys.path.insert(0, '../../')
from configure import INFO

version = INFO['version']
# The full version, including alpha/beta/rc tags.
release = INFO['version']
sys.path.pop(0)

# List of directories, relative to source directory, that shouldn't be searched
# for source files.
exclude_trees = []

# The name of the Pygments (syntax highlighting) style to use.
pygments_style = 'tango'


# -- Options for HTML output ---------------------------------------------------

html_theme = 'alabaster'

html_title = "{project} {release}".format(project=project, release=release)
html_short_title = "{project}".format(project=project)

# Add any paths that contain custom static files (such as style sheets) here,
# relative to this directory. They are copied after the builtin static files,
# so a file named "default.css" will overwrite the builtin "default.css".
html_static_path = ['_static']

# Output file base name for HTML help builder.
htmlhelp_basename = 'pysizingdoc'


# -- Options for LaTeX output --------------------------------------------------

# Grouping the document tree into LaTeX files. List of tuples
# (source start file, target name, title, author, documentclass [howto/manual]).
latex_documents = [
  ('index', 'pysizing.tex', u'PySizing Documentation',
   u'The PySizing Development Team', 'manual'),
]

# Autodocumentation Flags
autodoc_member_order = "groupwise"
autoclass_content = "both"
autosummary_generate = []

# Prevent numpy from making silly tables
napoleon_numpy_docstring = True
napoleon_google_docstring = False
