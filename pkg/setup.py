"""
Setup configuration for the Kyle-Back equilibrium laboratory
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.split("#")[0].strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="kyleback-lab",
    version="0.1.0",
    description="Numerical laboratory for insider-trading equilibria: FBSDE solvers, epsilon-certificates and level-set probes",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests", "tests.*", "examples", "examples.*")),
    package_data={"": ["*.json"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.10",
    install_requires=[req for req in requirements if not req.startswith("pytest")],
    extras_require={"test": ["pytest>=7.4.0"]},
    entry_points={"console_scripts": ["kyleback-lab=labcli.cli:main"]},
    keywords="kyle-back insider-trading fbsde bsde monte-carlo equilibrium",
)
