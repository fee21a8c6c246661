# -*- coding: utf-8 -*-
"""
Installation script for the parabolic-transport controllability toolkit.
"""

from setuptools import setup

setup(
    name="ptcontrol",
    version="0.1.0",
    description="Null-controllability analysis and numerical experiments for "
                "coupled parabolic-transport systems on the torus",
    python_requires=">=3.8",
    py_modules=["errors", "polymat", "model", "modal", "dynamics", "hum", "algsolv", "wkb",
                "config", "report", "casebook", "cli"],
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.9",
        "numexpr>=2.7",
        "h5py>=3.0",
    ],
    extras_require={
        "test": ["pytest>=6", "hypothesis>=6"],
    },
    entry_points={
        "console_scripts": ["ptcontrol=cli:main"],
    },
)
