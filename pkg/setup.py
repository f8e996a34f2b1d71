import re

from setuptools import find_packages, setup

with open("pyqebd/version.py") as f:
    version = re.search(r'__version__ = "([^"]+)"', f.read()).group(1)

setup(
    name="pyqebd",
    version=version,
    description="Quadratic exponential binary models for clustered binary data",
    license="Apache2",
    include_package_data=True,
    package_data={"pyqebd": ["data/scenarios/*.json"]},
    packages=find_packages(exclude=["tests", "tests.*"]),
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "packaging",
    ],
    entry_points={"console_scripts": ["pyqebd = pyqebd.cli:main"]},
    python_requires=">=3.10",
    zip_safe=False,
    keywords=["ising", "gee", "pseudo-likelihood", "binary data"],
    classifiers=[
        "Intended Audience :: Science/Research",
        "Development Status :: 4 - Beta",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
