from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="rnd-desk",
    version="1.0.0",
    description="Random network distillation exploration, dual-head PPO and baselines on toy environments",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["rnd_desk*"]),
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.7",
        "PyYAML>=5.4",
    ],
    extras_require={"test": ["pytest>=7"]},
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
        "Environment :: Console",
    ],
    python_requires=">=3.8",
    entry_points={
        "console_scripts": [
            "rnd-desk=rnd_desk.main:main",
            "rndd=rnd_desk.main:main",
        ],
    },
    keywords="reinforcement-learning exploration intrinsic-motivation ppo rnd cli",
)
