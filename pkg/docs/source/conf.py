#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# fused-strassen documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import os
import sys
import textwrap

import sphinx_rtd_theme

sys.path.insert(0, os.path.abspath(os.path.join("..", "..", "src", "python")))

# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.autodoc',
              'sphinx.ext.napoleon',
              'sphinx.ext.intersphinx',
              'sphinx.ext.ifconfig']

templates_path = ['_templates']

source_suffix = '.rst'

# The master toctree document.
master_doc = 'index'

# General information about the project.
project = 'fused-strassen'
copyright = '2026, fused-strassen developers'
author = 'fused-strassen developers'

# The short X.Y version.
version = '0.1.0'
# The full version, including alpha/beta/rc tags.
release = 'alpha'

language = 'en'

exclude_patterns = []

pygments_style = 'sphinx'

todo_include_todos = False

# -- Options for intersphinx  ---------------------------------------------
intersphinx_mapping = {
    'numpy': ('https://numpy.org/doc/stable/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
}

# -- Options for HTML output ----------------------------------------------

html_theme = "sphinx_rtd_theme"
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_static_path = ['_static']

htmlhelp_basename = 'fused-strassendoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
    # The paper size ('letterpaper' or 'a4paper').
    'papersize': 'letterpaper',

    # The font size ('10pt', '11pt' or '12pt').
    'pointsize': '10pt',

    # Additional stuff for the LaTeX preamble.
    'preamble': textwrap.dedent(
        '''
        \\setcounter{tocdepth}{3}
        \\setcounter{secnumdepth}{6}
        '''),
}

latex_documents = [
    (master_doc, 'fused-strassen.tex', 'fused-strassen Documentation',
     author, 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'fused-strassen', 'fused-strassen Documentation',
     [author], 1)
]

# -- Customize sphinx settings
numfig = True
autoclass_content = 'both'
autodoc_docstring_signature = True
autodoc_member_order = 'bysource'
autodoc_mock_imports = ['numba']
add_function_parentheses = False
