# -*- coding: utf-8 -*-

import os
from pathlib import Path
from shutil import copy2

from setuptools import find_packages, setup

path = Path(__file__).parent

with open(os.path.join(path, "README.md")) as f:
    long_description = f.read()

with open(path / "requirements.txt") as f:
    install_requires = f.readlines()

setup_args = {
    "name": "fused-strassen",
    "version": "0.1.0",
    "description": "Strassen fused into a BLIS-style five-loop dgemm, with an analytical performance model.",
    "long_description": long_description,
    "long_description_content_type": "text/markdown",
    "author": "fused-strassen developers",
    "license": "BSD-3",
    "install_requires": install_requires,
    "packages": find_packages("src/python", exclude=["tests", "tests.*"]),
    "package_dir": {"": "src/python"},
    "package_data": {
        "fused_strassen": [
            "presets/ivybridge-1core.cfg",
            "presets/ivybridge-10core.cfg",
        ]
    },
    "entry_points": {
        "console_scripts": ["fused-strassen-bench=fused_strassen.bench:main"],
    },
    "classifiers": [
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
    ],
    "keywords": [
        "dgemm",
        "Strassen",
        "BLIS",
        "matrix multiplication",
    ],
    "zip_safe": False,
}


def _copy_preset_files(project_dir):
    single_core_path = os.path.join(project_dir, "presets", "ivybridge-1core.cfg")
    ten_core_path = os.path.join(project_dir, "presets", "ivybridge-10core.cfg")

    dst_dir = os.path.join(project_dir, "src", "python", "fused_strassen", "presets")
    if not os.path.exists(dst_dir):
        os.mkdir(dst_dir)

    copy2(single_core_path, dst_dir)
    copy2(ten_core_path, dst_dir)


if __name__ == "__main__":
    _copy_preset_files(os.path.dirname(__file__))
    setup(**setup_args)
