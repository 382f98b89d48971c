from setuptools import setup
import os.path
import codecs

with open("README.md", 'r', encoding="utf-8") as f:
    long_description = f.read()

with open("requirements.txt", 'r', encoding="utf-8") as f:
    requires = f.read()


def read(rel_path):
    here = os.path.abspath(os.path.dirname(__file__))
    with codecs.open(os.path.join(here, rel_path), 'r') as fp:
        return fp.read()


def get_version(rel_path):
    for line in read(rel_path).splitlines():
        if line.startswith('__version__'):
            delim = '"' if '"' in line else "'"
            return line.split(delim)[1]
    raise RuntimeError("Unable to find version string.")


setup(
    name="xprint",
    version=get_version("xprint/__version__.py"),
    description="Fingerprinting app behaviours in encrypted traffic from "
                "packet side channels.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    zip_safe=False,
    include_package_data=True,
    install_requires=requires,
    packages=["xprint", "xprint.tests"],
    entry_points={"console_scripts": ["xprint=xprint.cli:main"]},
    python_requires=">=3.7",
    classifiers=[
        "Programming Language :: Python",
        "Topic :: Software Development :: Libraries",
        "Topic :: System :: Networking :: Monitoring",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research"
    ],
    tests_require=["pytest"]
)
