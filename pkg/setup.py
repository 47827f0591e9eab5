#!/usr/bin/env python
# -*- coding: utf-8 -*-

import sys

import setuptools

__version__ = "0.4.0"
__author__ = "opinionflow developers"
__email__ = "opinionflow@users.noreply.github.com"

if "sdist" in sys.argv[1:]:
    with open("opinionflow/pckg_info.py", "w") as f:
        for name in ["__version__", "__author__", "__email__"]:
            f.write('{} = "{}"\n'.format(name, locals()[name]))

from setuptools import setup

with open("README.rst") as readme_file:
    readme = readme_file.read()

with open("HISTORY.rst") as history_file:
    history = history_file.read().replace(".. :changelog:", "")

requirements = [
    "numpy >= 1.20",
    "scipy >= 1.7",
    "networkx >= 2.6",
    "pyparsing",
    "openpyxl",
]

test_requirements = ["pytest"]

setup(
    name="opinionflow",
    version=__version__,
    description="Graph diffusion with stubborn nodes, trainable weights and consensus checks.",
    long_description=readme + "\n\n" + history,
    author=__author__,
    author_email=__email__,
    packages=setuptools.find_packages(exclude=["tests", "examples", "examples.*"]),
    entry_points={
        "console_scripts": [
            "opinionflow = opinionflow.opinionflow:main",
        ]
    },
    package_dir={"opinionflow": "opinionflow"},
    include_package_data=True,
    install_requires=requirements,
    license="MIT",
    zip_safe=False,
    keywords="opinion dynamics graph diffusion consensus influence cascade",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    test_suite="tests",
    tests_require=test_requirements,
)
