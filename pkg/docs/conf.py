# -*- coding: utf-8 -*-
"""Sphinx configuration for the uwsPipe documentation."""

import os
from pyproject_parser import PyProject
import sys

sys.path.insert(0, os.path.abspath('..'))

# -- General configuration ------------------------------------------------

# numpydoc renders the docstrings, m2r2 includes the markdown project files
extensions = ['sphinx.ext.autodoc',
              'sphinx.ext.intersphinx',
              'sphinx.ext.mathjax',
              'sphinx.ext.viewcode',
              'numpydoc',
              'm2r2']

source_suffix = '.rst'
master_doc = 'index'

# Project details come from the build manifest
info = PyProject.load("../pyproject.toml")

project = 'uwsPipe'
title = '{:s} Documentation'.format(project)
author = ', '.join([auth['name'] for auth in info.project['authors']])
description = info.project['description']
category = 'Speech Processing'
copyright = ', '.join(['2026', author])

version = info.project['version'].base_version
release = '{:s}-alpha'.format(version)

language = 'en'
exclude_patterns = ['.build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'

# -- Output options -------------------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = '{:s}doc'.format(project)

latex_documents = [(master_doc, '{:s}.tex'.format(project), title, author,
                    'manual')]
man_pages = [(master_doc, 'uwspipe', title, [author], 1)]
texinfo_documents = [(master_doc, project, title, author, project,
                      description, category)]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
    'xarray': ('https://docs.xarray.dev/en/stable', None)}
