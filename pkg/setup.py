#!/usr/bin/env python
from pathlib import Path

from setuptools import find_packages, setup

from qnet_scheduling import __version__


REQUIREMENTS = [
    'Django>=3.2',
    'numpy>=1.22',
    'Pillow>=9.0',
    'scipy>=1.7',
]


CLASSIFIERS = [
    'Development Status :: 4 - Beta',
    'Environment :: Console',
    'Intended Audience :: Science/Research',
    'License :: OSI Approved :: BSD License',
    'Operating System :: OS Independent',
    'Programming Language :: Python',
    'Programming Language :: Python :: 3',
    'Programming Language :: Python :: 3.9',
    'Programming Language :: Python :: 3.10',
    'Programming Language :: Python :: 3.11',
    'Framework :: Django',
    'Framework :: Django :: 3.2',
    'Framework :: Django :: 4.0',
    'Framework :: Django :: 4.1',
    'Framework :: Django :: 4.2',
    'Topic :: Scientific/Engineering :: Physics',
    'Topic :: System :: Networking',
]


this_directory = Path(__file__).parent
long_description = (this_directory / "README.rst").read_text()

setup(
    name='django-qnet-scheduling',
    version=__version__,
    license='BSD-3-Clause',
    description='Entanglement distribution scheduling simulator for quantum networks, as a Django app',
    long_description=long_description,
    long_description_content_type='text/x-rst',
    packages=find_packages(exclude=['tests', 'tests.*']),
    include_package_data=True,
    zip_safe=False,
    install_requires=REQUIREMENTS,
    classifiers=CLASSIFIERS,
    test_suite='tests.settings.run',
)
