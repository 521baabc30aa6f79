# -*- coding: utf-8 -*-
#
# StateRank documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.intersphinx']

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

project = u'StateRank'
copyright = u'2024, the StateRank developers'

# The short X.Y version and the full version, read without importing the
# package so the docs build without numpy installed.
__namespace = {}
__version_path = os.path.join('..', 'staterank', '__version__.py')
with open(__version_path, 'rb') as fh:
    exec(fh.read(), __namespace)
__version__ = __namespace['__version__']
vparts = __version__.split('.')
version = '.'.join(vparts[:2])
release = '.'.join(vparts)

exclude_patterns = ['_build']

pygments_style = 'sphinx'

autodoc_mock_imports = ['numpy', 'scipy', 'pandas', 'sklearn', 'matplotlib']

# -- Options for HTML output ---------------------------------------------------

html_theme = 'alabaster'

html_static_path = []

html_show_sphinx = False

htmlhelp_basename = 'StateRankdoc'

# -- Options for manual page output --------------------------------------------

man_pages = [
    ('index', 'staterank', u'StateRank Documentation',
     [u'the StateRank developers'], 1)
]

intersphinx_mapping = {
    'flask': ('https://flask.palletsprojects.com/en/latest/', None),
    'click': ('https://click.palletsprojects.com/en/latest/', None),
    'python3': ('https://docs.python.org/3/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
}
