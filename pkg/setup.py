# -*- coding: utf-8 -*-
from setuptools import setup  # Always prefer setuptools over distutils
from os import path
__author__ = 'luckydonald'

here = path.abspath(path.dirname(__file__))

long_description = """Knowledge graph attention with a distance kernel, a temporal encoder and detection/retrieval metrics, working on precomputed video, object and keyword embeddings."""

setup(
    name='tiograph', version="0.3.0",
    description='Distance kernel graph attention and temporal encoding for embedding level video anomaly detection.',
    long_description=long_description,
    # The project's main homepage.
    url='https://github.com/luckydonald/tiograph',
    # Author details
    author='luckydonald',
    author_email='code@luckydonald.de',
    # Choose your license
    license='GPLv3+',
    # See https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Development Status :: 3 - Alpha',  # 2 - Pre-Alpha, 3 - Alpha, 4 - Beta, 5 - Production/Stable
        # Indicate who your project is intended for
        'Intended Audience :: Developers',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Topic :: Multimedia :: Video',
        'Topic :: Software Development :: Libraries :: Python Modules',
        'Environment :: Console',
        # Pick your license as you wish (should match "license" above)
        'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Operating System :: MacOS :: MacOS X',
        'Operating System :: Unix',
    ],
    # What does your project relate to?
    keywords='video anomaly detection violence knowledge graph attention gaussian kernel temporal encoder retrieval embeddings',
    packages=['tiograph', 'tiograph.bundle', 'tiograph.graph', 'tiograph.model'],
    python_requires='>=3.8',
    # List run-time dependencies here. These will be installed by pip when your
    # project is installed. For an analysis of "install_requires" vs pip's
    # requirements files see:
    # https://packaging.python.org/en/latest/requirements.html
    install_requires=[
        "numpy>=1.20",  # vectors, the bundle blob
        "torch>=1.13",  # the model, autograd and Adam
        "scikit-learn",  # ROC curve for the AUC
        "DictObject", "luckydonald-utils>=0.70",  # general utils
    ],
    # List additional groups of dependencies here (e.g. development dependencies).
    # You can install these using the following syntax, for example:
    # $ pip install -e .[dev,test]
    extras_require = {
      'dev': ['bump2version'],
    },
    # To provide executable scripts, use entry points in preference to the
    # "scripts" keyword. Entry points provide cross-platform support and allow
    # pip to create the appropriate form of executable for the target platform.
    entry_points={
        'console_scripts': [
            'tiograph = tiograph.cli:main',
        ],
    },
)
