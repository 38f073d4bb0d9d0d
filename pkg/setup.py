from setuptools import setup, find_packages

setup(
    name="trustdyn",
    version="0.1.0",
    packages=find_packages(exclude=("tests", "examples")),
    install_requires=[
        "PyYAML>=6.0",
        "numpy>=1.24",
        "pandas>=2.0",
    ],
    extras_require={"test": ["pytest>=7.4"]},
    entry_points={"console_scripts": ["trustdyn=trustdyn.cli:main"]},
    python_requires=">=3.9",
    description="Replicator dynamics of the N-player trust game with punishing investors",
    keywords="evolutionary-game-theory replicator-dynamics trust-game",
)
