#!/usr/bin/env python
# -----------------------------------------------------------------------------
# File: setup.py
# Description: Packaging and distribution configuration for the multi-task
#              adversarial attack laboratory.
#
# License: MIT
# -----------------------------------------------------------------------------
import os
from setuptools import setup, find_packages

base_dir = os.path.abspath(os.path.dirname(__file__))

long_description = ""
readme_path = os.path.join(base_dir, "README.md")
if os.path.exists(readme_path):
    with open(readme_path, encoding="utf-8") as f:
        long_description = f.read()

version_file_path = os.path.join(base_dir, "mtlattack/version.py")

def get_version():
    if os.path.exists(version_file_path):
        with open(version_file_path, encoding="utf-8") as f:
            for line in f:
                if line.startswith('__version__'):
                    delim = '"' if '"' in line else "'"
                    return line.split(delim)[1]
            raise RuntimeError("Unable to find version string.")

setup(
    name="mtlattack",
    version=get_version(),
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "matplotlib>=3.5",
        "PyYAML>=6.0",
    ],
    long_description=long_description,
    long_description_content_type='text/markdown',
    description="Laboratory for white-box adversarial attacks and adversarial training on multi-task models.",
    entry_points={
        "console_scripts": [
            "mtlattack=mtlattack.labcli.main:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires='>=3.9',
    license='MIT',
    extras_require = {
        "dev": [
            "pytest>=8.0.0",
            "coverage>=7.0.0",
        ],
    },
    include_package_data=True,
    zip_safe=False,
)
