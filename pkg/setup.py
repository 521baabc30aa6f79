#!/usr/bin/env python

import re
from os import path

from setuptools import setup, find_packages

requirements = [
    'Flask>=2.1',
    'click>=8.0',
    'numpy>=1.22',
    'scipy>=1.8',
    'pandas>=1.5',
    'scikit-learn>=1.0',
    'matplotlib>=3.5',
]

version_file = path.join(
    path.dirname(__file__),
    'staterank',
    '__version__.py'
)
with open(version_file, 'r') as fp:
    m = re.search(
        r"^__version__ = ['\"]([^'\"]*)['\"]",
        fp.read(),
        re.M
    )
    version = m.groups(1)[0]

here = path.abspath(path.dirname(__file__))

with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='StateRank',
    version=version,
    license='BSD',
    description='Latent behavioural states and PageRank fingerprints from home sensor events',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(exclude=['tests']),
    classifiers=[
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'License :: OSI Approved :: BSD License',
        'Topic :: Scientific/Engineering',
    ],
    zip_safe=False,
    include_package_data=True,
    platforms='any',
    python_requires='>=3.9',
    install_requires=requirements,
    entry_points={
        'console_scripts': ['staterank=staterank.cli:main'],
    },
    # Install these with "pip install -e '.[docs]'
    extras_require={
        'docs': 'sphinx',
        'tests': ['pytest>=7', 'pytest-cov'],
    }
)
