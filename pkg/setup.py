from setuptools import find_packages, setup


with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="vanillapg",
    version="0.1.0",
    description="Vanilla policy gradient for finite MDPs with a harness that certifies its convergence theory",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["main"],
    install_requires=[
        "pydantic~=2.10.4",
        "loguru~=0.7.3",
        "structlog",
        "numpy",
        "pandas",
        "tomli; python_version < '3.11'",
        "pydantic_core>=2.27.2,<2.28.0",
    ],
    extras_require={
        "test": ["pytest~=8.3.5"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
    entry_points={
        "console_scripts": [
            "vanillapg=main:main",
        ],
    },
)
