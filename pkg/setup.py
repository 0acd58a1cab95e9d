"""Setup script for the Pre-ordering Transfer Toolkit."""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="preorder-transfer-toolkit",
    version="1.0.0",
    description="Syntactic pre-ordering for low-resource NMT transfer learning: rules, metrics, synthetic data and experiments",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["src", "src.*"]),
    package_data={"": ["*.yaml", "*.rules"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Topic :: Text Processing :: Linguistic",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
    install_requires=[
        "pandas>=1.5.0",
        "numpy>=1.21.0",
        "pyyaml>=6.0",
        "scikit-learn>=1.0.0",
        "jellyfish>=0.11.0",
    ],
    extras_require={
        "dev": ["pytest", "pytest-cov", "black", "flake8"],
    },
    entry_points={
        "console_scripts": [
            "preorder=src.cli:main_preorder",
            "xlate=src.cli:main_xlate",
            "score=src.cli:main_score",
            "sigtest=src.cli:main_sigtest",
            "synth=src.cli:main_synth",
            "nmt=src.cli:main_nmt",
            "experiment=src.cli:main_experiment",
        ],
    },
)
