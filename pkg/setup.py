# -*- coding: utf-8 -*-
from setuptools import setup, find_packages  # Always prefer setuptools over distutils
from codecs import open  # To use a consistent encoding
from os import path

here = path.abspath(path.dirname(__file__))

# Get the long description from the relevant file
with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

with open(path.join(here, 'requirements.txt'), encoding='utf-8') as f:
    install_requires = [line.strip() for line in f if line.strip() and not line.startswith('#')]

setup(
    name='''forgecast''',

    # Versions should comply with PEP440.
    version='0.1.0',

    description='''Forecasting under distribution shift with learned forgetting mechanisms''',
    long_description=long_description,
    long_description_content_type='text/markdown',

    license='AGPL',

    classifiers=[
        'Development Status :: 4 - Beta',
        'License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)',
        'Programming Language :: Python :: 3.8',
        'Topic :: Scientific/Engineering',
    ],

    keywords='''forecasting distribution-shift ridge bilevel''',

    packages=find_packages(exclude=['contrib', 'docs']),
    python_requires='>=3.8',

    install_requires=install_requires,

    include_package_data=True,
    package_data={
    },
    data_files=[],

    # Third-party forecasting methods register under forgecast.methods and
    # become selectable by name in experiment configs.
    entry_points='''
        [console_scripts]
        forgecast=forgecast.cli:main

        [forgecast.methods]
        stationary=forgecast.methods.stationary:StationaryMethod
        window=forgecast.methods.window:WindowMethod
        grid_search_exp=forgecast.methods.grid_exp:GridSearchExpMethod
        state_space=forgecast.methods.state_space:StateSpaceMethod
        grad_exp=forgecast.methods.gradient:GradExpMethod
        grad_mixed_decay=forgecast.methods.gradient:GradMixedDecayMethod
    ''',
)
